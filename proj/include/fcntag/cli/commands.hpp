#pragma once

// Batch commands behind the `fcntag` tool. Each takes a resolved RunConfig
// and writes only under its output directory; failures surface as fcntag::Error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <initializer_list>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "fcntag/audio/feature_io.hpp"
#include "fcntag/cli/config.hpp"
#include "fcntag/data/synth.hpp"
#include "fcntag/eval/report.hpp"
#include "fcntag/eval/svg.hpp"
#include "fcntag/train/trainer.hpp"

namespace fcntag::cli {

namespace fs = std::filesystem;
using audio::FeatureKind;

inline constexpr const char* kIndexFile = "index.csv";
inline constexpr const char* kFailuresFile = "failures.csv";

/// Fills the keys a command reads but the user left unset.
inline void defaults(RunConfig& c, std::initializer_list<std::pair<const char*, const char*>> kv) {
  for (const auto& [k, v] : kv) c.set_default(k, v);
}

inline void frontend_defaults(RunConfig& c) { defaults(c, {{"frontend.rate", "12000"}, {"frontend.frames", "1366"}}); }

/// Feature kind from `frontend.kind`, or implied by the model name.
inline FeatureKind resolve_kind(RunConfig& c) {
  if (!c.has("frontend.kind")) {
    const auto name = c.str_or("model.name", "fcn4");
    c.set("frontend.kind", name.rfind("mfcc", 0) == 0 ? "mfcc" : name == "fcn4-stft" ? "stft" : "mel");
  }
  auto k = c.str("frontend.kind");
  try {
    return audio::parse_feature_kind(k);
  } catch (const Error&) {
    throw Error(ErrorKind::invalid_config, "frontend.kind must be mel, stft or mfcc, got '" + k + "'");
  }
}

inline audio::FrontendConfig frontend_config(const RunConfig& c) {
  auto cfg = audio::make_config(c.integer("frontend.rate"), c.integer("frontend.frames"));
  try {
    audio::validate(cfg);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
  return cfg;
}

inline void write_config(const RunConfig& c, const fs::path& dir, const std::string& extra = {}) {
  fs::create_directories(dir);
  eval::write_text(dir / "config.txt", c.text() + extra);
}

/// Config lines describing every block of a model, for the echoed config.
inline std::string spec_lines(const models::ModelSpec& spec) {
  std::string out;
  std::istringstream in(spec.canonical());
  std::string line;
  std::size_t i = 0;
  char key[32];
  while (std::getline(in, line)) {
    if (line.rfind("block ", 0) != 0) continue;
    std::snprintf(key, sizeof key, "model.block%02zu", ++i);
    out += std::string(key) + " = " + line.substr(6) + "\n";
  }
  return out;
}

inline std::string file_stem_for(const std::string& clip_id) {
  std::string s;
  for (char ch : clip_id) s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.') ? ch : '_';
  return s.empty() ? "_" : s;
}

// ---------------------------------------------------------------- synth

inline void cmd_synth(RunConfig c, std::ostream& log) {
  defaults(c, {{"run.seed", "0"}, {"synth.clips", "1000"}, {"synth.tag_probability", "0.35"}, {"synth.duration", "5.5"}});
  data::SynthConfig sc;
  sc.n_clips = c.size("synth.clips");
  sc.seed = c.u64("run.seed");
  sc.tag_probability = c.real("synth.tag_probability");
  sc.duration_s = c.real("synth.duration");
  try {
    data::validate(sc);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }
  const fs::path out = c.str("run.out");
  write_config(c, out);
  auto m = data::synth_generate(sc, out);
  log << "synth: wrote " << m.entries.size() << " clips and manifest.csv to " << out.string() << "\n";
}

// ---------------------------------------------------------------- preprocess

inline std::map<std::string, fs::path> load_feature_index(const fs::path& kind_dir) {
  const auto path = kind_dir / kIndexFile;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "no feature index at " + path.string() + " (run preprocess first)");
  std::map<std::string, fs::path> index;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = data::detail::split_csv(line);
    if (f.size() < 2) throw Error(ErrorKind::invalid_input, path.string() + ": malformed row '" + line + "'");
    index[f[0]] = kind_dir / f[1];
  }
  return index;
}

/// Extracts one feature file per manifest clip into `<out>/<kind>/`, skipping
/// files whose header already matches the frontend configuration.
inline void cmd_preprocess(RunConfig c, std::ostream& log) {
  frontend_defaults(c);
  const auto kind = resolve_kind(c);
  const auto fcfg = frontend_config(c);
  const auto hash = audio::config_hash(fcfg);
  const auto bands = static_cast<std::uint32_t>(audio::band_count_for(kind, fcfg));
  const auto manifest = data::load_manifest(c.str("data.manifest"), false);
  const fs::path dir = fs::path(c.str("run.out")) / audio::to_string(kind);
  write_config(c, dir);

  const auto n = manifest.entries.size();
  std::vector<std::string> names(n), failures(n);
  std::vector<char> computed(n, 0);
  std::set<std::string> used;
  for (std::size_t i = 0; i < n; ++i) {
    auto stem = file_stem_for(manifest.entries[i].clip_id);
    if (!used.insert(stem).second) stem += "_" + std::to_string(i);
    used.insert(stem);
    names[i] = stem + ".feat";
  }

  parallel_for(n, worker_count(), [&](std::size_t i) {
    const auto target = dir / names[i];
    audio::FeatureHeader h;
    if (audio::peek_feature_header(target, h) && h.kind == kind && h.config_hash == hash && h.band_count == bands &&
        h.frame_count == static_cast<std::uint32_t>(fcfg.n_frames))
      return;
    try {
      auto clip = audio::read_wav(manifest.resolve(manifest.entries[i]));
      audio::write_features(target, audio::extract(clip, kind, fcfg));
      computed[i] = 1;
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  std::string index = "clip_id,path,config_hash\n", failed = "clip_id,error\n";
  std::size_t n_failed = 0, n_computed = 0;
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = manifest.entries[i].clip_id;
    if (!failures[i].empty()) {
      ++n_failed;
      failed += data::detail::csv_field(id) + "," + data::detail::csv_field(failures[i]) + "\n";
      continue;
    }
    n_computed += computed[i];
    index += data::detail::csv_field(id) + "," + data::detail::csv_field(names[i]) + "," + hex + "\n";
  }
  eval::write_text(dir / kIndexFile, index);
  eval::write_text(dir / kFailuresFile, failed);
  log << "preprocess (" << audio::to_string(kind) << ", " << bands << "x" << fcfg.n_frames << "): " << n_computed
      << " computed, " << (n - n_computed - n_failed) << " up to date, " << n_failed << " failed\n";
  if (n_failed)
    throw Error(ErrorKind::io, std::to_string(n_failed) + " clip(s) failed; see " + (dir / kFailuresFile).string());
}

// ---------------------------------------------------------------- dataset loading

/// Features and labels of one split, checked against the model's input shape.
inline train::Dataset load_split(const data::Manifest& m, const data::TagVocabulary& vocab, data::Split split,
                                 const std::map<std::string, fs::path>& index, const models::ModelSpec& spec) {
  auto sl = data::label_matrix(m, vocab, split);
  train::Dataset d;
  d.labels = sl.labels;
  for (std::size_t row : sl.entry_index) {
    const auto& id = m.entries[row].clip_id;
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorKind::invalid_input, "clip '" + id + "' has no features (run preprocess)");
    auto fm = audio::read_features(it->second);
    if (fm.kind != spec.input_kind || static_cast<std::size_t>(fm.band_count) != spec.bands ||
        static_cast<std::size_t>(fm.frame_count) != spec.frames)
      throw Error(ErrorKind::contract, "clip '" + id + "' features are " + audio::to_string(fm.kind) + " " +
                                           std::to_string(fm.band_count) + "x" + std::to_string(fm.frame_count) +
                                           " but " + spec.name + " expects " + audio::to_string(spec.input_kind) +
                                           " " + std::to_string(spec.bands) + "x" + std::to_string(spec.frames) +
                                           " (preprocess with --frames " + std::to_string(spec.frames) + ")");
    d.features.push_back(std::move(fm));
    d.clip_ids.push_back(id);
  }
  return d;
}

inline fs::path features_root(const RunConfig& c) { return c.str("data.features"); }

inline std::vector<std::string> read_tags(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) tags.push_back(line);
  return tags;
}

/// Vocabulary stored with a run, or rebuilt from the manifest.
inline data::TagVocabulary vocab_for_checkpoint(const fs::path& ckpt, const data::Manifest& m, std::size_t k) {
  auto stored = ckpt.parent_path() / "tags.txt";
  if (fs::exists(stored)) {
    data::TagVocabulary v;
    v.tags = read_tags(stored);
    v.counts.assign(v.tags.size(), 0);
    return v;
  }
  return data::build_vocab(m, k);
}

// ---------------------------------------------------------------- train

inline void cmd_train(RunConfig c, std::ostream& log) {
  defaults(c, {{"run.seed", "0"}, {"model.name", "fcn4"}, {"data.tags", "0"}, {"train.epochs", "30"}, {"train.batch_size", "32"}, {"train.lr", "0.001"}, {"train.patience", "10"}});
  const auto kind = resolve_kind(c);
  const auto manifest = data::load_manifest(c.str("data.manifest"), false);
  const auto vocab = data::build_vocab(manifest, c.size("data.tags"));
  const auto spec = models::spec_by_name(c.str("model.name"), kind, vocab.size());
  models::shape_trace(spec);

  train::TrainConfig tc;
  tc.batch_size = c.size("train.batch_size");
  tc.max_epochs = c.size("train.epochs");
  tc.patience = c.size("train.patience");
  tc.adam.lr = c.real("train.lr");
  tc.seed = c.u64("run.seed");
  try {
    train::validate(tc);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, e.what());
  }

  const fs::path out = c.str("run.out");
  write_config(c, out, spec_lines(spec));
  std::string tag_text;
  for (const auto& t : vocab.tags) tag_text += t + "\n";
  eval::write_text(out / "tags.txt", tag_text);

  const auto index = load_feature_index(features_root(c) / audio::to_string(kind));
  auto train_set = load_split(manifest, vocab, data::Split::train, index, spec);
  auto val_set = load_split(manifest, vocab, data::Split::valid, index, spec);
  log << "train: " << spec.name << " on " << train_set.size() << " clips (" << val_set.size() << " validation), "
      << vocab.size() << " tags, " << models::param_count(spec).total << " parameters\n";

  auto model = models::build<float>(spec, tc.seed);
  models::save_checkpoint(model, out / "init.ckpt");
  train::TrainOutputs to;
  to.run_dir = out;
  to.on_epoch = [&](const train::EpochRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %3zu  loss %.6f  val_auc %.4f  (%.1f s)\n", r.epoch, r.train_loss,
                  r.val_macro_auc, r.wall_time_s);
    log << buf << std::flush;
  };
  auto hist = train::train(model, train_set, val_set, tc, to);
  models::save_checkpoint(model, out / "final.ckpt");
  char buf[128];
  std::snprintf(buf, sizeof buf, "best val_auc %.4f at epoch %zu\n", hist.best_val_auc, hist.best_epoch);
  log << buf;
}

// ---------------------------------------------------------------- evaluate / predict

struct Scored {
  models::Model<float> model;
  data::TagVocabulary vocab;
  train::Dataset data;
  ScoreMatrix scores;
  bool calibrated = false;
};

inline Scored score_split(RunConfig& c) {
  const fs::path ckpt = c.str("eval.checkpoint");
  if (!fs::exists(ckpt)) throw Error(ErrorKind::io, "checkpoint not found: " + ckpt.string());
  auto model = models::load_checkpoint<float>(ckpt);
  const auto& spec = model.spec();
  c.set_default("frontend.kind", audio::to_string(spec.input_kind));
  if (resolve_kind(c) != spec.input_kind)
    throw Error(ErrorKind::contract, "checkpoint expects " + std::string(audio::to_string(spec.input_kind)) +
                                         " features, not " + c.str("frontend.kind"));
  const auto manifest = data::load_manifest(c.str("data.manifest"), false);
  auto vocab = vocab_for_checkpoint(ckpt, manifest, spec.output_dim);
  if (vocab.size() != spec.output_dim)
    throw Error(ErrorKind::contract, "label vocabulary has " + std::to_string(vocab.size()) +
                                         " tags but the model outputs " + std::to_string(spec.output_dim));
  const auto split = data::parse_split(c.str("data.split"));
  const auto index = load_feature_index(features_root(c) / audio::to_string(spec.input_kind));
  auto ds = load_split(manifest, vocab, split, index, spec);
  if (ds.size() == 0) throw Error(ErrorKind::invalid_request, std::string("split '") + to_string(split) + "' is empty");
  auto ptrs = ds.pointers();
  std::span<const audio::FeatureMatrix* const> view(ptrs);
  bool calibrated = false;
  if (!model.batchnorm_ready()) {
    models::calibrate_batchnorm(model, view);
    calibrated = true;
  }
  auto scores = models::predict(model, view);
  return {std::move(model), std::move(vocab), std::move(ds), std::move(scores), calibrated};
}

inline void cmd_evaluate(RunConfig c, std::ostream& log) {
  defaults(c, {{"data.split", "test"}, {"eval.roc", "false"}});
  auto s = score_split(c);
  auto report = eval::macro_auc(s.scores, s.data.labels);
  const auto split = c.str("data.split");

  std::vector<std::pair<std::string, std::string>> roc_files;
  if (c.flag("eval.roc")) {
    for (std::size_t k = 0; k < s.vocab.size(); ++k) {
      if (!report.per_tag[k]) continue;
      std::vector<float> col(s.scores.rows);
      std::vector<std::uint8_t> lab(s.scores.rows);
      for (std::size_t r = 0; r < s.scores.rows; ++r) {
        col[r] = s.scores.at(r, k);
        lab[r] = s.data.labels.at(r, k);
      }
      auto pts = eval::roc_curve(std::span<const float>(col), std::span<const std::uint8_t>(lab));
      eval::svg::Series series{s.vocab.tags[k], {}};
      for (auto p : pts) series.points.emplace_back(p.fpr, p.tpr);
      char title[160];
      std::snprintf(title, sizeof title, "ROC %s (AUC %.4f)", s.vocab.tags[k].c_str(), *report.per_tag[k]);
      roc_files.emplace_back(file_stem_for(s.vocab.tags[k]) + ".svg",
                             eval::svg::line_chart({title, "false positive rate", "true positive rate"},
                                                   {series, {"chance", {{0, 0}, {1, 1}}}}));
    }
  }

  const fs::path out = c.str("run.out");
  write_config(c, out);
  eval::write_text(out / ("auc_" + split + ".csv"), eval::report_csv(report, s.vocab.tags));
  if (!roc_files.empty()) {
    fs::create_directories(out / "roc");
    for (const auto& [name, svg] : roc_files) eval::write_text(out / "roc" / name, svg);
  }
  if (s.calibrated) log << "note: checkpoint had no batch-norm statistics; calibrated them on this split\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "macro AUC (%s, %zu clips, %zu/%zu tags): %.6f\n", split.c_str(), s.scores.rows,
                s.vocab.size() - report.n_skipped, s.vocab.size(), report.macro);
  log << buf;
}

inline void cmd_predict(RunConfig c, std::ostream& log) {
  defaults(c, {{"data.split", "test"}});
  auto s = score_split(c);
  std::string csv = "clip_id";
  for (const auto& t : s.vocab.tags) csv += "," + data::detail::csv_field(t);
  csv += "\n";
  char buf[32];
  for (std::size_t r = 0; r < s.scores.rows; ++r) {
    csv += data::detail::csv_field(s.data.clip_ids[r]);
    for (std::size_t k = 0; k < s.scores.cols; ++k) {
      std::snprintf(buf, sizeof buf, ",%.6f", s.scores.at(r, k));
      csv += buf;
    }
    csv += "\n";
  }
  const fs::path out = c.str("run.out");
  write_config(c, out);
  const auto path = out / ("predictions_" + c.str("data.split") + ".csv");
  eval::write_text(path, csv);
  log << "predict: wrote " << s.scores.rows << " rows to " << path.string() << "\n";
}

// ---------------------------------------------------------------- inspect

inline void cmd_inspect(RunConfig c, std::ostream& log) {
  defaults(c, {{"model.name", "fcn4"}, {"data.tags", "50"}});
  const auto kind = resolve_kind(c);
  const std::size_t k = c.size("data.tags");
  const auto spec = models::spec_by_name(c.str("model.name"), kind, k);
  const auto trace = models::shape_trace(spec);
  const auto pc = models::param_count(spec);

  char buf[200];
  log << "model " << spec.name << ": " << audio::to_string(spec.input_kind) << " input " << spec.bands << "x"
      << spec.frames << ", " << spec.output_dim << " outputs\n\n";
  std::snprintf(buf, sizeof buf, "%-8s %-26s %s\n", "stage", "blocks", "output (H x W x D)");
  log << buf;
  auto first = spec.frame_based ? models::TraceEntry{1, spec.frames, spec.bands} : models::TraceEntry{spec.bands, spec.frames, 1};
  std::snprintf(buf, sizeof buf, "%-8s %-26s %zu x %zu x %zu\n", "input", "", first.h, first.w, first.d);
  log << buf;
  std::vector<std::string> stage_blocks;
  for (const auto& b : spec.blocks) {
    const bool opens = b.kind == models::BlockKind::conv || b.kind == models::BlockKind::dense;
    std::string label = models::to_string(b.kind);
    if (b.kind == models::BlockKind::conv) label = "conv" + std::to_string(b.kernel) + "x" + std::to_string(b.kernel);
    if (b.kind == models::BlockKind::pool) label = "mp(" + std::to_string(b.pool_h) + "," + std::to_string(b.pool_w) + ")";
    if (opens || stage_blocks.empty()) stage_blocks.push_back(label);
    else stage_blocks.back() += " " + label;
  }
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-8zu %-26s %zu x %zu x %zu\n", i + 1, i < stage_blocks.size() ? stage_blocks[i].c_str() : "",
                  trace[i].h, trace[i].w, trace[i].d);
    log << buf;
  }
  std::snprintf(buf, sizeof buf, "%-8s %-26s 1 x 1 x %zu\n\n", "head", "conv1x1 sigmoid", spec.output_dim);
  log << buf;

  std::snprintf(buf, sizeof buf, "%-24s %12s %10s\n", "layer", "learned", "bn stats");
  log << buf;
  for (const auto& l : pc.per_layer) {
    std::snprintf(buf, sizeof buf, "%-24s %12zu %10zu\n", l.label.c_str(), l.learned, l.stats);
    log << buf;
  }
  std::snprintf(buf, sizeof buf, "%-24s %12zu %10zu\n", "total", pc.total, pc.stats);
  log << buf;

  if (spec.name == "fcn4" || spec.name == "fcn4-stft") {
    std::string sizes;
    for (const auto& t : trace) sizes += " -> " + std::to_string(t.h) + "x" + std::to_string(t.w);
    log << "\nnote: pooling uses floor division, so the " << spec.bands << "x" << spec.frames << " input runs" << sizes
        << ".\n      Annotations of this 4-layer network that show 24x85 and 12x21 after the second and third\n"
           "      blocks belong to the 5-layer ladder and cannot be reached with these pool sizes.\n";
  }
}

// ---------------------------------------------------------------- plot

struct HistoryCurve {
  std::string name;
  std::vector<train::EpochRecord> rows;
};

inline std::vector<train::EpochRecord> read_history(const fs::path& path) {
  std::ifstream in(path);
  std::vector<train::EpochRecord> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    auto f = data::detail::split_csv(line);
    if (f.size() < 4) continue;
    try {
      rows.push_back({std::stoul(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, path.string() + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

/// Learning curves for every run below the directory plus the bins-per-kHz chart.
inline void cmd_plot(RunConfig c, std::ostream& log) {
  frontend_defaults(c);
  const fs::path dir = c.str("run.out");
  if (!fs::is_directory(dir)) throw Error(ErrorKind::invalid_request, "not a directory: " + dir.string());
  std::vector<HistoryCurve> curves;
  std::vector<fs::path> found;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
    if (it.depth() > 2) it.disable_recursion_pending();
    if (it->is_regular_file() && it->path().filename() == "history.csv") found.push_back(it->path());
  }
  std::sort(found.begin(), found.end());
  for (const auto& p : found) {
    auto rel = fs::relative(p.parent_path(), dir).generic_string();
    if (rel == ".") rel = dir.filename().string();
    auto rows = read_history(p);
    if (!rows.empty()) curves.push_back({rel, std::move(rows)});
  }

  const fs::path out = dir / "plots";
  fs::create_directories(out);
  std::vector<std::string> written;
  if (!curves.empty()) {
    std::vector<eval::svg::Series> auc, loss;
    double max_epoch = 1;
    for (const auto& cv : curves) {
      eval::svg::Series a{cv.name, {}}, l{cv.name, {}};
      for (const auto& r : cv.rows) {
        a.points.emplace_back(double(r.epoch), r.val_macro_auc);
        l.points.emplace_back(double(r.epoch), r.train_loss);
        max_epoch = std::max(max_epoch, double(r.epoch));
      }
      auc.push_back(std::move(a));
      loss.push_back(std::move(l));
    }
    eval::write_text(out / "learning_curves.svg",
                     eval::svg::line_chart({"Validation macro AUC", "epoch", "AUC", 1, max_epoch, 0, 1}, auc, true));
    eval::write_text(out / "train_loss.svg",
                     eval::svg::line_chart({"Training loss", "epoch", "BCE", 1, max_epoch, 0, 1}, loss, true));
    written.push_back("learning_curves.svg");
    written.push_back("train_loss.svg");
  }

  const auto fcfg = frontend_config(c);
  auto mel = eval::bins_per_khz(FeatureKind::log_mel, fcfg);
  auto stft = eval::bins_per_khz(FeatureKind::log_stft, fcfg);
  std::vector<std::string> cats;
  for (std::size_t b = 0; b < mel.size(); ++b) cats.push_back(std::to_string(b) + "-" + std::to_string(b + 1));
  eval::write_text(out / "bins_per_khz.svg",
                   eval::svg::bar_chart({"Frequency bins per 1 kHz", "kHz", "bins"}, cats,
                                        {{"mel", std::vector<double>(mel.begin(), mel.end())},
                                         {"stft", std::vector<double>(stft.begin(), stft.end())}}));
  written.push_back("bins_per_khz.svg");
  log << "plot: " << curves.size() << " run(s) found; wrote";
  for (const auto& w : written) log << " " << (out / w).string();
  log << "\n";
}

}  // namespace fcntag::cli
