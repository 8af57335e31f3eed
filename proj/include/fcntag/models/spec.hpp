#pragma once

#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcntag/audio/frontend.hpp"
#include "fcntag/error.hpp"

namespace fcntag::models {

using audio::FeatureKind;

enum class BlockKind { conv, bn, relu, pool, dropout, dense, time_pool };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::conv: return "conv";
    case BlockKind::bn: return "bn";
    case BlockKind::relu: return "relu";
    case BlockKind::pool: return "pool";
    case BlockKind::dropout: return "dropout";
    case BlockKind::dense: return "dense";
    case BlockKind::time_pool: return "time_pool";
  }
  return "?";
}

/// One layer of a spec. `dense` is a per-frame affine map over the channel
/// axis; `time_pool` is a global max over the remaining time axis.
struct Block {
  BlockKind kind = BlockKind::relu;
  std::size_t channels = 0;  // conv, dense
  std::size_t kernel = 3;    // conv
  std::size_t pool_h = 1, pool_w = 1;
  double rate = 0.5;  // dropout

  static Block conv(std::size_t ch, std::size_t k = 3) { return {BlockKind::conv, ch, k}; }
  static Block dense(std::size_t units) { return {BlockKind::dense, units, 1}; }
  static Block bn() { return {BlockKind::bn}; }
  static Block relu() { return {BlockKind::relu}; }
  static Block pool(std::size_t ph, std::size_t pw) { return {BlockKind::pool, 0, 0, ph, pw}; }
  static Block dropout(double r = 0.5) { return {BlockKind::dropout, 0, 0, 1, 1, r}; }
  static Block time_pool() { return {BlockKind::time_pool}; }

  bool operator==(const Block&) const = default;
};

struct ModelSpec {
  std::string name;
  FeatureKind input_kind = FeatureKind::log_mel;
  std::size_t bands = 96;
  std::size_t frames = 1366;
  // Frame-based networks treat the feature bands as channels of a 1-high map.
  bool frame_based = false;
  std::vector<Block> blocks;
  std::size_t output_dim = 50;

  bool operator==(const ModelSpec&) const = default;

  /// Line-oriented text form; `parse_spec` inverts it.
  std::string canonical() const {
    std::ostringstream os;
    os << "name " << name << "\n";
    os << "input " << audio::to_string(input_kind) << " " << bands << " " << frames << (frame_based ? " frames" : " map")
       << "\n";
    os << "output " << output_dim << "\n";
    for (const auto& b : blocks) {
      os << "block " << to_string(b.kind);
      switch (b.kind) {
        case BlockKind::conv: os << " " << b.channels << " " << b.kernel; break;
        case BlockKind::dense: os << " " << b.channels; break;
        case BlockKind::pool: os << " " << b.pool_h << " " << b.pool_w; break;
        case BlockKind::dropout: {
          std::ostringstream r;
          r.precision(17);
          r << b.rate;
          os << " " << r.str();
          break;
        }
        default: break;
      }
      os << "\n";
    }
    return os.str();
  }
};

inline ModelSpec parse_spec(std::string_view text) {
  auto bad = [](const std::string& why) { return Error(ErrorKind::invalid_spec, "model spec: " + why); };
  ModelSpec spec;
  spec.blocks.clear();
  std::istringstream in{std::string(text)};
  std::string line;
  bool saw_name = false, saw_input = false, saw_output = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "name") {
      ls >> spec.name;
      saw_name = true;
    } else if (key == "input") {
      std::string kind, layout;
      ls >> kind >> spec.bands >> spec.frames >> layout;
      if (!ls) throw bad("malformed input line '" + line + "'");
      spec.input_kind = audio::parse_feature_kind(kind);
      spec.frame_based = layout == "frames";
      saw_input = true;
    } else if (key == "output") {
      ls >> spec.output_dim;
      saw_output = true;
    } else if (key == "block") {
      std::string kind;
      ls >> kind;
      Block b;
      if (kind == "conv") {
        b = Block::conv(0);
        ls >> b.channels >> b.kernel;
      } else if (kind == "dense") {
        b = Block::dense(0);
        ls >> b.channels;
      } else if (kind == "pool") {
        b = Block::pool(0, 0);
        ls >> b.pool_h >> b.pool_w;
      } else if (kind == "dropout") {
        b = Block::dropout();
        ls >> b.rate;
      } else if (kind == "bn") {
        b = Block::bn();
      } else if (kind == "relu") {
        b = Block::relu();
      } else if (kind == "time_pool") {
        b = Block::time_pool();
      } else {
        throw bad("unknown block '" + kind + "'");
      }
      if (!ls) throw bad("malformed block line '" + line + "'");
      spec.blocks.push_back(b);
    } else {
      throw bad("unknown key '" + key + "'");
    }
  }
  if (!saw_name || !saw_input || !saw_output) throw bad("missing name, input or output line");
  return spec;
}

struct TraceEntry {
  std::size_t h = 0, w = 0, d = 0;
  bool operator==(const TraceEntry&) const = default;
};

namespace detail {

inline bool opens_stage(BlockKind k) { return k == BlockKind::conv || k == BlockKind::dense; }

inline std::string block_label(std::size_t index, const Block& b) {
  std::string s = "block " + std::to_string(index) + " (" + to_string(b.kind);
  if (b.kind == BlockKind::pool) s += " " + std::to_string(b.pool_h) + "x" + std::to_string(b.pool_w);
  return s + ")";
}

}  // namespace detail

/// Output (H, W, D) after every conv/dense stage (a stage runs up to the next
/// conv or dense block), using floor pooling. The head is not included.
/// Throws invalid_ladder if a pool does not fit or the map is not 1x1 at the end.
inline std::vector<TraceEntry> shape_trace(const ModelSpec& spec) {
  TraceEntry cur = spec.frame_based ? TraceEntry{1, spec.frames, spec.bands} : TraceEntry{spec.bands, spec.frames, 1};
  std::vector<TraceEntry> trace;
  bool in_stage = false;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& b = spec.blocks[i];
    if (detail::opens_stage(b.kind)) {
      if (in_stage) trace.push_back(cur);
      in_stage = true;
    }
    switch (b.kind) {
      case BlockKind::conv:
        if (b.kernel % 2 == 0 || b.channels == 0)
          throw Error(ErrorKind::invalid_spec, detail::block_label(i, b) + ": needs an odd kernel and channels > 0");
        cur.d = b.channels;
        break;
      case BlockKind::dense:
        if (cur.h != 1) throw Error(ErrorKind::invalid_spec, detail::block_label(i, b) + ": dense needs a 1-high map");
        cur.d = b.channels;
        break;
      case BlockKind::pool:
        if (b.pool_h == 0 || b.pool_w == 0 || b.pool_h > cur.h || b.pool_w > cur.w)
          throw Error(ErrorKind::invalid_ladder, detail::block_label(i, b) + " does not fit a " + std::to_string(cur.h) +
                                                     "x" + std::to_string(cur.w) + " map");
        cur.h /= b.pool_h;
        cur.w /= b.pool_w;
        break;
      case BlockKind::time_pool: cur.w = 1; break;
      default: break;
    }
  }
  if (in_stage) trace.push_back(cur);
  if (cur.h != 1 || cur.w != 1) {
    std::size_t last_pool = spec.blocks.size();
    for (std::size_t i = 0; i < spec.blocks.size(); ++i)
      if (spec.blocks[i].kind == BlockKind::pool || spec.blocks[i].kind == BlockKind::time_pool) last_pool = i;
    std::string where = last_pool < spec.blocks.size() ? detail::block_label(last_pool, spec.blocks[last_pool])
                                                       : std::string("no pooling block");
    throw Error(ErrorKind::invalid_ladder, "ladder ends at " + std::to_string(cur.h) + "x" + std::to_string(cur.w) +
                                               ", not 1x1; last pooling: " + where);
  }
  return trace;
}

inline std::size_t final_channels(const ModelSpec& spec) {
  auto t = shape_trace(spec);
  return t.empty() ? (spec.frame_based ? spec.bands : 1) : t.back().d;
}

struct LayerParams {
  std::string label;  // e.g. "conv1 3x3x1x128"
  std::size_t learned = 0;
  std::size_t stats = 0;  // BN running mean/var, not trained
};

struct ParamCount {
  std::size_t total = 0;  // learned parameters
  std::size_t stats = 0;
  std::vector<LayerParams> per_layer;
};

/// conv = k*k*Din*Dout + Dout; dense = in*out + out; bn = 2D learned + 2D stats.
inline ParamCount param_count(const ModelSpec& spec) {
  shape_trace(spec);
  ParamCount pc;
  std::size_t d = spec.frame_based ? spec.bands : 1;
  std::size_t n_conv = 0, n_dense = 0, n_bn = 0;
  auto add = [&](std::string label, std::size_t learned, std::size_t stats) {
    pc.per_layer.push_back({std::move(label), learned, stats});
    pc.total += learned;
    pc.stats += stats;
  };
  for (const auto& b : spec.blocks) {
    if (b.kind == BlockKind::conv) {
      add("conv" + std::to_string(++n_conv) + " " + std::to_string(b.kernel) + "x" + std::to_string(b.kernel) + "x" +
              std::to_string(d) + "x" + std::to_string(b.channels),
          b.kernel * b.kernel * d * b.channels + b.channels, 0);
      d = b.channels;
    } else if (b.kind == BlockKind::dense) {
      add("dense" + std::to_string(++n_dense) + " " + std::to_string(d) + "x" + std::to_string(b.channels),
          d * b.channels + b.channels, 0);
      d = b.channels;
    } else if (b.kind == BlockKind::bn) {
      add("bn" + std::to_string(++n_bn) + " " + std::to_string(d), 2 * d, 2 * d);
    }
  }
  add("head " + std::to_string(d) + "x" + std::to_string(spec.output_dim), d * spec.output_dim + spec.output_dim, 0);
  return pc;
}

// ---------------------------------------------------------------- model zoo

using Ladder = std::vector<std::pair<std::size_t, std::size_t>>;

inline ModelSpec conv_ladder_spec(std::string name, FeatureKind kind, std::size_t bands, std::size_t frames,
                                  const std::vector<std::size_t>& channels, const Ladder& pools,
                                  std::size_t extra_1x1, std::size_t output_dim, double dropout = 0.5) {
  ModelSpec s;
  s.name = std::move(name);
  s.input_kind = kind;
  s.bands = bands;
  s.frames = frames;
  s.output_dim = output_dim;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    s.blocks.insert(s.blocks.end(), {Block::conv(channels[i]), Block::bn(), Block::relu(),
                                     Block::pool(pools[i].first, pools[i].second), Block::dropout(dropout)});
  }
  for (std::size_t i = 0; i < extra_1x1; ++i)
    s.blocks.insert(s.blocks.end(), {Block::conv(1024, 1), Block::bn(), Block::relu()});
  return s;
}

namespace detail {

inline Ladder with_freq_pools(const Ladder& mel, const std::vector<std::size_t>& freq) {
  Ladder out = mel;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].first = freq[i];
  return out;
}

}  // namespace detail

/// Full-size FCN-n (n in 3..7) on 96x1366 mel or 129x1366 STFT input.
inline ModelSpec fcn_spec(int n_layers, FeatureKind kind = FeatureKind::log_mel, std::size_t output_dim = 50) {
  if (kind == FeatureKind::mfcc_stack)
    throw Error(ErrorKind::invalid_spec, "FCN specs take mel or stft input, not mfcc");
  const bool stft = kind == FeatureKind::log_stft;
  const std::size_t bands = stft ? 129 : 96;
  const std::string name = "fcn" + std::to_string(n_layers) + (stft ? "-stft" : "");
  switch (n_layers) {
    case 3: {
      Ladder p{{3, 5}, {4, 16}, {8, 17}};
      if (stft) p = detail::with_freq_pools(p, {4, 4, 8});
      return conv_ladder_spec(name, kind, bands, 1366, {256, 768, 2048}, p, 0, output_dim);
    }
    case 4: {
      Ladder p{{2, 4}, {4, 5}, {3, 8}, {4, 8}};
      if (stft) p = detail::with_freq_pools(p, {3, 4, 3, 3});
      return conv_ladder_spec(name, kind, bands, 1366, {128, 384, 768, 2048}, p, 0, output_dim);
    }
    case 5:
    case 6:
    case 7: {
      Ladder p{{2, 4}, {2, 4}, {2, 4}, {3, 5}, {4, 4}};
      if (stft) p = detail::with_freq_pools(p, {3, 2, 2, 3, 3});
      return conv_ladder_spec(name, kind, bands, 1366, {128, 256, 512, 1024, 2048}, p,
                              static_cast<std::size_t>(n_layers - 5), output_dim);
    }
    default:
      throw Error(ErrorKind::invalid_spec, "unsupported FCN depth " + std::to_string(n_layers) + " (expected 3..7)");
  }
}

inline ModelSpec frame_network_spec(std::string name, std::size_t bands, std::size_t frames,
                                    const std::vector<std::size_t>& hidden, std::size_t output_dim,
                                    double dropout = 0.5) {
  ModelSpec s;
  s.name = std::move(name);
  s.input_kind = FeatureKind::mfcc_stack;
  s.bands = bands;
  s.frames = frames;
  s.frame_based = true;
  s.output_dim = output_dim;
  for (std::size_t h : hidden) s.blocks.insert(s.blocks.end(), {Block::dense(h), Block::bn(), Block::relu()});
  s.blocks.push_back(Block::time_pool());
  s.blocks.push_back(Block::dropout(dropout));
  return s;
}

/// Frame-based MFCC network: three per-frame dense layers, global time max, head.
inline ModelSpec mfcc_spec(std::size_t output_dim = 50) {
  return frame_network_spec("mfcc4", 90, 1366, {256, 512, 1024}, output_dim);
}

/// Dropout rate of the desk-scale variants. At 0.5 the 16-channel first stage
/// trains too noisily to fit the synthetic task in 30 epochs.
inline constexpr double kSmallDropout = 0.25;

/// Desk-scale variants on 256-frame input.
inline ModelSpec fcn4_small_spec(FeatureKind kind = FeatureKind::log_mel, std::size_t output_dim = 8) {
  if (kind == FeatureKind::mfcc_stack)
    return frame_network_spec("mfcc4-small", 90, 256, {32, 48, 64}, output_dim, kSmallDropout);
  const bool stft = kind == FeatureKind::log_stft;
  Ladder p = stft ? Ladder{{3, 4}, {4, 4}, {3, 4}, {3, 4}} : Ladder{{2, 4}, {4, 4}, {3, 4}, {4, 4}};
  return conv_ladder_spec(stft ? "fcn4-small-stft" : "fcn4-small", kind, stft ? 129 : 96, 256, {16, 24, 32, 64}, p,
                          0, output_dim, kSmallDropout);
}

inline std::vector<std::string> model_names() {
  return {"fcn3", "fcn4", "fcn5", "fcn6", "fcn7", "mfcc4", "fcn4-stft", "fcn4-small", "mfcc4-small"};
}

/// Resolves a CLI model name. `input` selects the feature kind for FCNs;
/// "fcn4-stft" forces STFT and "mfcc4" forces MFCC input.
inline ModelSpec spec_by_name(std::string_view name, FeatureKind input, std::size_t output_dim) {
  auto need = [&](FeatureKind want) {
    if (input != want)
      throw Error(ErrorKind::invalid_spec, std::string(name) + " takes " + audio::to_string(want) + " input, not " +
                                               audio::to_string(input));
  };
  if (name == "mfcc4") {
    need(FeatureKind::mfcc_stack);
    return mfcc_spec(output_dim);
  }
  if (name == "mfcc4-small") {
    need(FeatureKind::mfcc_stack);
    return fcn4_small_spec(FeatureKind::mfcc_stack, output_dim);
  }
  if (name == "fcn4-stft") {
    need(FeatureKind::log_stft);
    return fcn_spec(4, FeatureKind::log_stft, output_dim);
  }
  if (name == "fcn4-small") {
    if (input == FeatureKind::mfcc_stack) need(FeatureKind::log_mel);
    return fcn4_small_spec(input, output_dim);
  }
  if (name.size() == 4 && name.substr(0, 3) == "fcn" && name[3] >= '3' && name[3] <= '7')
    return fcn_spec(name[3] - '0', input, output_dim);
  std::string valid;
  for (const auto& n : model_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::invalid_spec, "unknown model '" + std::string(name) + "'; valid names: " + valid);
}

}  // namespace fcntag::models
