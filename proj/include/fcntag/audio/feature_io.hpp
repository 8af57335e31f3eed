#pragma once

// Binary feature file, little-endian:
//   "FCNF" | u16 version=1 | u8 kind | u32 bands | u32 frames | u64 config_hash |
//   bands*frames float32, band-major.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fcntag/audio/frontend.hpp"
#include "fcntag/error.hpp"

namespace fcntag::audio {

inline constexpr std::uint16_t kFeatureFileVersion = 1;
inline constexpr std::size_t kFeatureHeaderSize = 4 + 2 + 1 + 4 + 4 + 8;

namespace detail {

template <typename U>
void put_le(std::vector<unsigned char>& out, U v) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

struct FeatureHeader {
  FeatureKind kind{};
  std::uint32_t band_count = 0;
  std::uint32_t frame_count = 0;
  std::uint64_t config_hash = 0;
};

inline std::vector<unsigned char> encode_features(const FeatureMatrix& fm) {
  if (fm.data.size() != static_cast<std::size_t>(fm.band_count) * fm.frame_count)
    throw Error(ErrorKind::shape, "feature matrix data size does not match bands x frames");
  std::vector<unsigned char> out;
  out.reserve(kFeatureHeaderSize + 4 * fm.data.size());
  out.insert(out.end(), {'F', 'C', 'N', 'F'});
  detail::put_le<std::uint16_t>(out, kFeatureFileVersion);
  out.push_back(static_cast<unsigned char>(fm.kind));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(fm.band_count));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(fm.frame_count));
  detail::put_le<std::uint64_t>(out, fm.config_hash);
  for (float v : fm.data) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline FeatureHeader decode_feature_header(const unsigned char* p, std::size_t size, const std::string& origin) {
  if (size < kFeatureHeaderSize || std::memcmp(p, "FCNF", 4) != 0)
    throw Error(ErrorKind::invalid_input, origin + ": not a feature file");
  auto version = detail::get_le<std::uint16_t>(p + 4);
  if (version != kFeatureFileVersion)
    throw Error(ErrorKind::invalid_input, origin + ": unsupported feature file version " + std::to_string(version));
  unsigned kind = p[6];
  if (kind > 2) throw Error(ErrorKind::invalid_input, origin + ": unknown feature kind " + std::to_string(kind));
  FeatureHeader h;
  h.kind = static_cast<FeatureKind>(kind);
  h.band_count = detail::get_le<std::uint32_t>(p + 7);
  h.frame_count = detail::get_le<std::uint32_t>(p + 11);
  h.config_hash = detail::get_le<std::uint64_t>(p + 15);
  return h;
}

inline FeatureMatrix decode_features(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>") {
  auto h = decode_feature_header(bytes.data(), bytes.size(), origin);
  const std::size_t count = static_cast<std::size_t>(h.band_count) * h.frame_count;
  if (bytes.size() != kFeatureHeaderSize + 4 * count)
    throw Error(ErrorKind::invalid_input, origin + ": payload size does not match header");
  FeatureMatrix fm;
  fm.kind = h.kind;
  fm.band_count = static_cast<int>(h.band_count);
  fm.frame_count = static_cast<int>(h.frame_count);
  fm.config_hash = h.config_hash;
  fm.data.resize(count);
  const unsigned char* p = bytes.data() + kFeatureHeaderSize;
  for (std::size_t i = 0; i < count; ++i) {
    float v = std::bit_cast<float>(detail::get_le<std::uint32_t>(p + 4 * i));
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, origin + ": non-finite feature value");
    fm.data[i] = v;
  }
  return fm;
}

inline void write_features(const std::filesystem::path& path, const FeatureMatrix& fm) {
  auto bytes = encode_features(fm);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_features(bytes, path.string());
}

/// Reads only the header; returns false if the file is missing or malformed.
inline bool peek_feature_header(const std::filesystem::path& path, FeatureHeader& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  unsigned char buf[kFeatureHeaderSize];
  in.read(reinterpret_cast<char*>(buf), kFeatureHeaderSize);
  if (in.gcount() != static_cast<std::streamsize>(kFeatureHeaderSize)) return false;
  try {
    header = decode_feature_header(buf, kFeatureHeaderSize, path.string());
  } catch (const Error&) {
    return false;
  }
  std::error_code ec;
  auto size = std::filesystem::file_size(path, ec);
  return !ec && size == kFeatureHeaderSize + 4ull * header.band_count * header.frame_count;
}

}  // namespace fcntag::audio
