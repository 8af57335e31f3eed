#pragma once

// Checkpoint layout (little-endian):
//   "FCNC" u16 version
//   u32 spec_len, spec canonical text
//   u32 n_params, then per parameter: u32 name_len, name, u32 ndim, u32 dims[ndim], f32 values
//   u32 n_bn, then per BN layer: u32 name_len, name, u8 initialized, u32 channels, f64 mean[c], f64 var[c]

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fcntag/models/model.hpp"

namespace fcntag::models {

inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

class Writer {
 public:
  template <typename U>
  void put(U v) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    bytes.insert(bytes.end(), b, b + sizeof(U));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& b, std::string origin) : bytes_(b), origin_(std::move(origin)) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string get_string() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& why) const { throw Error(ErrorKind::io, origin_ + ": " + why); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  const std::vector<unsigned char>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::vector<unsigned char> encode_checkpoint(Model<T>& model) {
  detail::Writer w;
  w.bytes.insert(w.bytes.end(), {'F', 'C', 'N', 'C'});
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put_string(model.spec().canonical());
  auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put_string(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (T v : t.values()) w.put<float>(static_cast<float>(v));
  }
  auto states = model.batchnorm_states();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(states.size()));
  for (const auto& [name, st] : states) {
    w.put_string(name);
    w.put<std::uint8_t>(st->initialized ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(st->running_mean.size()));
    for (double v : st->running_mean) w.put<double>(v);
    for (double v : st->running_var) w.put<double>(v);
  }
  return std::move(w.bytes);
}

template <typename T = float>
Model<T> decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>") {
  detail::Reader r(bytes, origin);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FCNC", 4) != 0) r.fail("not a checkpoint (bad magic)");
  r.get<std::uint32_t>();
  auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  ModelSpec spec = parse_spec(r.get_string());
  Model<T> model(spec, 0);

  auto params = model.parameters();
  auto n = r.get<std::uint32_t>();
  if (n != params.size()) r.fail("parameter count " + std::to_string(n) + " does not match spec");
  for (auto& [name, t] : params) {
    auto stored = r.get_string();
    if (stored != name) r.fail("expected parameter '" + name + "', found '" + stored + "'");
    auto ndim = r.get<std::uint32_t>();
    Shape shape(ndim);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    if (shape != t.shape()) r.fail(name + ": stored shape " + shape_str(shape) + " != " + shape_str(t.shape()));
    for (auto& v : t.values()) v = static_cast<T>(r.get<float>());
  }
  auto states = model.batchnorm_states();
  auto n_bn = r.get<std::uint32_t>();
  if (n_bn != states.size()) r.fail("batchnorm layer count does not match spec");
  for (auto& [name, st] : states) {
    auto stored = r.get_string();
    if (stored != name) r.fail("expected batchnorm '" + name + "', found '" + stored + "'");
    st->initialized = r.get<std::uint8_t>() != 0;
    auto c = r.get<std::uint32_t>();
    if (c != st->running_mean.size()) r.fail(name + ": channel count mismatch");
    for (auto& v : st->running_mean) v = r.get<double>();
    for (auto& v : st->running_var) v = r.get<double>();
  }
  if (!r.done()) r.fail("trailing bytes after checkpoint");
  return model;
}

/// Writes through a temporary file and renames, so readers never see a partial checkpoint.
template <typename T>
void save_checkpoint(Model<T>& model, const std::filesystem::path& path) {
  auto bytes = encode_checkpoint(model);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T = float>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(bytes, path.string());
}

}  // namespace fcntag::models
