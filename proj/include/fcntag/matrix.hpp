#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fcntag {

/// Row-major N x K prediction scores.
struct ScoreMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<float> values;
  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Row-major N x K binary tag labels.
struct LabelMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint8_t> values;
  std::uint8_t at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::uint8_t& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

}  // namespace fcntag
