#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcntag/audio/frontend.hpp"
#include "fcntag/matrix.hpp"
#include "fcntag/models/spec.hpp"
#include "fcntag/nn/layers.hpp"
#include "fcntag/rng.hpp"

namespace fcntag::models {

using nn::Mode;

template <typename T = float>
class Model {
 public:
  struct Layer {
    Block block;
    std::string name;
    nn::Conv2DLayer<T> conv;  // conv and per-frame dense
    nn::BatchNormLayer<T> bn;
  };

  Model() = default;

  /// Parameters drawn from a stream derived from `seed`; BN stats start unset.
  Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    shape_trace(spec_);
    nn::Rng rng(derive_seed(seed, Stream::init));
    std::size_t d = spec_.frame_based ? spec_.bands : 1;
    std::size_t n_conv = 0, n_dense = 0, n_bn = 0;
    for (const auto& b : spec_.blocks) {
      Layer layer{b, {}, {}, {}};
      switch (b.kind) {
        case BlockKind::conv:
          layer.name = "conv" + std::to_string(++n_conv);
          layer.conv = nn::Conv2DLayer<T>(d, b.channels, b.kernel, rng);
          d = b.channels;
          break;
        case BlockKind::dense:
          layer.name = "dense" + std::to_string(++n_dense);
          layer.conv = nn::Conv2DLayer<T>(d, b.channels, 1, rng);
          d = b.channels;
          break;
        case BlockKind::bn:
          layer.name = "bn" + std::to_string(++n_bn);
          layer.bn = nn::BatchNormLayer<T>(d);
          break;
        default: layer.name = to_string(b.kind); break;
      }
      layers_.push_back(std::move(layer));
    }
    head_ = nn::Conv2DLayer<T>(d, spec_.output_dim, 1, rng);
  }

  const ModelSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// x: N x 1 x bands x frames. Returns N x K sigmoid scores.
  /// `dropout_rng` is required in train mode.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, nn::Rng* dropout_rng = nullptr) {
    if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != spec_.bands || x.dim(3) != spec_.frames)
      throw Error(ErrorKind::contract, spec_.name + ": expected input N x 1 x " + std::to_string(spec_.bands) + " x " +
                                           std::to_string(spec_.frames) + ", got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0);
    Tensor<T> h = spec_.frame_based ? reshape(x, {n, spec_.bands, 1, spec_.frames}) : x;
    for (auto& layer : layers_) {
      switch (layer.block.kind) {
        case BlockKind::conv:
        case BlockKind::dense: h = layer.conv(h); break;
        case BlockKind::bn: h = layer.bn(h, mode); break;
        case BlockKind::relu: h = relu(h); break;
        case BlockKind::pool: h = nn::maxpool2d(h, layer.block.pool_h, layer.block.pool_w); break;
        case BlockKind::time_pool: h = nn::maxpool2d(h, 1, h.dim(3)); break;
        case BlockKind::dropout:
          if (mode == Mode::train && layer.block.rate > 0.0) {
            if (!dropout_rng) throw Error(ErrorKind::contract, "training forward pass needs a dropout rng");
            h = nn::dropout(h, layer.block.rate, mode, *dropout_rng);
          }
          break;
      }
    }
    h = sigmoid(head_(h));
    return reshape(h, {n, spec_.output_dim});
  }

  /// Trainable tensors in a fixed order with stable names.
  std::vector<std::pair<std::string, Tensor<T>>> parameters() const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    for (const auto& l : layers_) {
      if (l.block.kind == BlockKind::conv || l.block.kind == BlockKind::dense) {
        out.emplace_back(l.name + ".kernel", l.conv.kernel);
        out.emplace_back(l.name + ".bias", l.conv.bias);
      } else if (l.block.kind == BlockKind::bn) {
        out.emplace_back(l.name + ".gamma", l.bn.gamma);
        out.emplace_back(l.name + ".beta", l.bn.beta);
      }
    }
    out.emplace_back("head.kernel", head_.kernel);
    out.emplace_back("head.bias", head_.bias);
    return out;
  }

  std::vector<std::pair<std::string, nn::BatchNormState*>> batchnorm_states() {
    std::vector<std::pair<std::string, nn::BatchNormState*>> out;
    for (auto& l : layers_)
      if (l.block.kind == BlockKind::bn) out.emplace_back(l.name, &l.bn.state);
    return out;
  }

  bool batchnorm_ready() const {
    return std::all_of(layers_.begin(), layers_.end(),
                       [](const Layer& l) { return l.block.kind != BlockKind::bn || l.bn.state.initialized; });
  }

  void zero_grad() {
    for (auto& [name, p] : parameters()) p.zero_grad();
  }

 private:
  ModelSpec spec_;
  std::vector<Layer> layers_;
  nn::Conv2DLayer<T> head_;
};

template <typename T = float>
Model<T> build(const ModelSpec& spec, std::uint64_t seed) {
  return Model<T>(spec, seed);
}

/// Stacks features into an N x 1 x bands x frames tensor, checking them against the spec.
template <typename T = float>
Tensor<T> stack_features(std::span<const audio::FeatureMatrix* const> batch, const ModelSpec& spec) {
  if (batch.empty()) throw Error(ErrorKind::contract, "empty batch");
  const std::size_t plane = spec.bands * spec.frames;
  std::vector<T> data(batch.size() * plane);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& fm = *batch[i];
    if (fm.kind != spec.input_kind || static_cast<std::size_t>(fm.band_count) != spec.bands ||
        static_cast<std::size_t>(fm.frame_count) != spec.frames)
      throw Error(ErrorKind::contract, spec.name + " expects " + audio::to_string(spec.input_kind) + " " +
                                           std::to_string(spec.bands) + "x" + std::to_string(spec.frames) +
                                           " features, got " + audio::to_string(fm.kind) + " " +
                                           std::to_string(fm.band_count) + "x" + std::to_string(fm.frame_count));
    std::copy(fm.data.begin(), fm.data.end(), data.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  return Tensor<T>::from({batch.size(), 1, spec.bands, spec.frames}, std::move(data));
}

/// Infer-mode scores for every feature matrix, evaluated in chunks of `batch_size`.
template <typename T>
ScoreMatrix predict(Model<T>& model, std::span<const audio::FeatureMatrix* const> features,
                    std::size_t batch_size = 32) {
  NoGradGuard no_grad;
  ScoreMatrix out{features.size(), model.spec().output_dim, {}};
  out.values.reserve(out.rows * out.cols);
  for (std::size_t start = 0; start < features.size(); start += batch_size) {
    auto chunk = features.subspan(start, std::min(batch_size, features.size() - start));
    auto scores = model.forward(stack_features<T>(chunk, model.spec()), Mode::infer);
    for (T v : scores.values()) out.values.push_back(static_cast<float>(v));
  }
  return out;
}

template <typename T>
ScoreMatrix predict(Model<T>& model, const std::vector<audio::FeatureMatrix>& features, std::size_t batch_size = 32) {
  std::vector<const audio::FeatureMatrix*> ptrs;
  for (const auto& f : features) ptrs.push_back(&f);
  return predict(model, std::span<const audio::FeatureMatrix* const>(ptrs), batch_size);
}

/// Fills unset BN running statistics from train-mode passes over `features`
/// (no parameter update, dropout off). Used to score a model that has never
/// been trained.
template <typename T>
void calibrate_batchnorm(Model<T>& model, std::span<const audio::FeatureMatrix* const> features,
                         std::size_t batch_size = 32) {
  NoGradGuard no_grad;
  std::vector<double> saved;
  for (auto& l : model.layers())
    if (l.block.kind == BlockKind::dropout) {
      saved.push_back(l.block.rate);
      l.block.rate = 0.0;
    }
  for (std::size_t start = 0; start < features.size(); start += batch_size) {
    auto chunk = features.subspan(start, std::min(batch_size, features.size() - start));
    auto x = stack_features<T>(chunk, model.spec());
    model.forward(x, Mode::train);
  }
  std::size_t i = 0;
  for (auto& l : model.layers())
    if (l.block.kind == BlockKind::dropout) l.block.rate = saved[i++];
}

}  // namespace fcntag::models
