#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fcntag/eval/auc.hpp"
#include "fcntag/models/checkpoint.hpp"
#include "fcntag/train/adam.hpp"
#include "fcntag/train/loss.hpp"

namespace fcntag::train {

/// Features with their label rows, aligned by index.
struct Dataset {
  std::vector<audio::FeatureMatrix> features;
  LabelMatrix labels;
  std::vector<std::string> clip_ids;

  std::size_t size() const { return features.size(); }
  std::vector<const audio::FeatureMatrix*> pointers() const {
    std::vector<const audio::FeatureMatrix*> p;
    p.reserve(features.size());
    for (const auto& f : features) p.push_back(&f);
    return p;
  }
};

struct TrainConfig {
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::size_t max_epochs = 30;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  validate(c.adam);
  if (c.batch_size < 1) throw Error(ErrorKind::invalid_config, "batch_size must be at least 1");
  if (c.max_epochs < 1) throw Error(ErrorKind::invalid_config, "max_epochs must be at least 1");
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_macro_auc = 0;
  double wall_time_s = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc = -std::numeric_limits<double>::infinity();
};

struct TrainOutputs {
  std::filesystem::path run_dir;  // empty: no files written
  std::function<void(const EpochRecord&)> on_epoch;
};

inline std::string history_header() { return "epoch,train_loss,val_macro_auc,wall_time_s\n"; }

inline std::string history_row(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.3f\n", r.epoch, r.train_loss, r.val_macro_auc, r.wall_time_s);
  return buf;
}

namespace detail {

template <typename T>
Tensor<T> label_rows(const LabelMatrix& labels, std::span<const std::size_t> rows) {
  std::vector<T> v;
  v.reserve(rows.size() * labels.cols);
  for (std::size_t r : rows)
    for (std::size_t k = 0; k < labels.cols; ++k) v.push_back(static_cast<T>(labels.at(r, k)));
  return Tensor<T>::from({rows.size(), labels.cols}, std::move(v));
}

inline void check_dataset(const Dataset& d, std::size_t output_dim, const char* which) {
  if (d.size() == 0) throw Error(ErrorKind::invalid_request, std::string(which) + " set is empty");
  if (d.labels.rows != d.size())
    throw Error(ErrorKind::contract, std::string(which) + " set: label rows do not match feature count");
  if (d.labels.cols != output_dim)
    throw Error(ErrorKind::contract, std::string(which) + " set has " + std::to_string(d.labels.cols) +
                                         " tags but the model outputs " + std::to_string(output_dim));
}

}  // namespace detail

/// Seeded Fisher-Yates shuffle of 0..n-1.
inline void shuffle_indices(std::vector<std::size_t>& idx, nn::Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

template <typename T>
eval::AucReport evaluate(models::Model<T>& model, const Dataset& data, std::size_t batch_size = 32) {
  auto ptrs = data.pointers();
  auto scores = models::predict(model, std::span<const audio::FeatureMatrix* const>(ptrs), batch_size);
  return eval::macro_auc(scores, data.labels);
}

/// Mean BCE of infer-mode predictions over the whole set.
template <typename T>
double evaluate_loss(models::Model<T>& model, const Dataset& data, std::size_t batch_size = 32) {
  auto ptrs = data.pointers();
  auto scores = models::predict(model, std::span<const audio::FeatureMatrix* const>(ptrs), batch_size);
  std::vector<T> p(scores.values.begin(), scores.values.end());
  std::vector<T> y(data.labels.values.begin(), data.labels.values.end());
  auto loss = bce_loss(Tensor<T>::from({scores.rows, scores.cols}, std::move(p)),
                       Tensor<T>::from({scores.rows, scores.cols}, std::move(y)));
  return static_cast<double>(loss.item());
}

/// Mini-batch Adam on BCE. After each epoch the validation macro AUC is
/// measured in infer mode; strict improvements are checkpointed to
/// `run_dir/best.ckpt`. Training stops after `max_epochs` or once `patience`
/// consecutive epochs pass without improvement. The model keeps its final
/// (not best) weights on return.
template <typename T>
TrainHistory train(models::Model<T>& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                   const TrainOutputs& out = {}) {
  validate(cfg);
  detail::check_dataset(train_set, model.spec().output_dim, "training");
  detail::check_dataset(val_set, model.spec().output_dim, "validation");

  nn::Rng shuffle_rng(derive_seed(cfg.seed, Stream::shuffle));
  nn::Rng dropout_rng(derive_seed(cfg.seed, Stream::dropout));
  Adam<T> adam(model.parameters(), cfg.adam);

  std::ofstream history_file;
  if (!out.run_dir.empty()) {
    std::filesystem::create_directories(out.run_dir);
    history_file.open(out.run_dir / "history.csv", std::ios::trunc);
    if (!history_file) throw Error(ErrorKind::io, "cannot write " + (out.run_dir / "history.csv").string());
    history_file << history_header() << std::flush;
  }

  const auto start = std::chrono::steady_clock::now();
  TrainHistory hist;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      std::span<const std::size_t> rows(order.data() + b0, std::min(cfg.batch_size, order.size() - b0));
      std::vector<const audio::FeatureMatrix*> batch;
      for (std::size_t r : rows) batch.push_back(&train_set.features[r]);
      auto x = models::stack_features<T>(batch, model.spec());
      auto y = detail::label_rows<T>(train_set.labels, rows);
      auto loss = bce_loss(model.forward(x, nn::Mode::train, &dropout_rng), y);
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv))
        throw Error(ErrorKind::numerical, "training diverged: loss is " + std::to_string(lv) + " at epoch " +
                                              std::to_string(epoch) + ", batch " +
                                              std::to_string(b0 / cfg.batch_size + 1));
      backward(loss);
      adam.step();
      model.zero_grad();
      loss_sum += lv * static_cast<double>(rows.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_macro_auc = evaluate(model, val_set, cfg.batch_size).macro;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    hist.epochs.push_back(rec);
    if (history_file.is_open()) history_file << history_row(rec) << std::flush;

    if (rec.val_macro_auc > hist.best_val_auc) {
      hist.best_val_auc = rec.val_macro_auc;
      hist.best_epoch = epoch;
      since_best = 0;
      if (!out.run_dir.empty()) models::save_checkpoint(model, out.run_dir / "best.ckpt");
    } else {
      ++since_best;
    }
    if (out.on_epoch) out.on_epoch(rec);
    if (since_best >= cfg.patience) break;
  }
  return hist;
}

}  // namespace fcntag::train
