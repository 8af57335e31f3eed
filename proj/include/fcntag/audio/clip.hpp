#pragma once

#include <vector>

#include "fcntag/error.hpp"

namespace fcntag::audio {

/// Mono sample sequence with its sample rate in Hz.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline void validate(const AudioClip& clip) {
  if (clip.samples.empty()) throw Error(ErrorKind::invalid_input, "audio clip has no samples");
  if (clip.sample_rate <= 0) throw Error(ErrorKind::invalid_input, "audio clip sample rate must be positive");
}

}  // namespace fcntag::audio
