// fcntag: command-line front end for the tagging pipeline.
//
//   fcntag synth --out data/synth --clips 1000 --seed 0
//   fcntag preprocess --manifest data/synth/manifest.csv --input mel --frames 256 --out feats
//   fcntag train --manifest ... --features feats --model fcn4-small --out runs/mel
//   fcntag evaluate --checkpoint runs/mel/best.ckpt --manifest ... --features feats --split test --out runs/mel/eval
//   fcntag inspect fcn5
//   fcntag plot runs

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "fcntag/cli/commands.hpp"
#include "fcntag/runtime.hpp"

namespace {

using fcntag::cli::RunConfig;

struct Binding {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& help,
          std::function<void(RunConfig, std::ostream&)> run)
      : sub_(app.add_subcommand(name, help)), run_(std::move(run)) {
    sub_->add_option("--config", config_path_, "key = value config file; flags override it");
    sub_->add_option("--set", overrides_, "extra section.key=value override (repeatable)");
  }

  Command& opt(const std::string& flag, const std::string& key, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->option = sub_->add_option(flag, b->value, help);
    bindings_.push_back(std::move(b));
    return *this;
  }

  Command& positional(const std::string& name, const std::string& key, const std::string& help) {
    return opt(name, key, help);
  }

  Command& toggle(const std::string& flag, const std::string& key, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->value = "true";
    b->option = sub_->add_flag(flag, help);
    bindings_.push_back(std::move(b));
    return *this;
  }

  bool parsed() const { return sub_->parsed(); }

  void run(std::ostream& log) const {
    RunConfig c = config_path_.empty() ? RunConfig{} : RunConfig::load(config_path_);
    for (const auto& b : bindings_)
      if (b->option->count() > 0) c.set(b->key, b->value);
    for (const auto& o : overrides_) c.apply_override(o);
    run_(std::move(c), log);
  }

 private:
  CLI::App* sub_;
  std::function<void(RunConfig, std::ostream&)> run_;
  std::string config_path_;
  std::vector<std::string> overrides_;
  std::vector<std::unique_ptr<Binding>> bindings_;
};

}  // namespace

int main(int argc, char** argv) {
  fcntag::tune_allocator();
  CLI::App app{"fcntag: music auto-tagging with fully convolutional networks"};
  app.require_subcommand(1);
  namespace cmd = fcntag::cli;

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help, auto fn) -> Command& {
    commands.push_back(std::make_unique<Command>(app, name, help, fn));
    return *commands.back();
  };

  add("synth", "generate the seeded synthetic tagging corpus", cmd::cmd_synth)
      .opt("--out", "run.out", "output directory")
      .opt("--clips", "synth.clips", "number of clips")
      .opt("--seed", "run.seed", "random seed");

  add("preprocess", "extract feature files for every manifest clip", cmd::cmd_preprocess)
      .opt("--manifest", "data.manifest", "manifest CSV")
      .opt("--input", "frontend.kind", "mel, stft or mfcc")
      .opt("--frames", "frontend.frames", "frames per clip (1366 full length, 256 for the small models)")
      .opt("--out", "run.out", "feature root directory");

  add("train", "train a model and checkpoint the best validation epoch", cmd::cmd_train)
      .opt("--manifest", "data.manifest", "manifest CSV")
      .opt("--features", "data.features", "feature root written by preprocess")
      .opt("--model", "model.name", "fcn3..fcn7, mfcc4, fcn4-stft, fcn4-small, mfcc4-small")
      .opt("--input", "frontend.kind", "mel, stft or mfcc")
      .opt("--seed", "run.seed", "random seed")
      .opt("--epochs", "train.epochs", "maximum epochs")
      .opt("--batch-size", "train.batch_size", "mini-batch size")
      .opt("--lr", "train.lr", "Adam learning rate")
      .opt("--patience", "train.patience", "epochs without improvement before stopping")
      .opt("--tags", "data.tags", "vocabulary size (0 keeps every training tag)")
      .opt("--out", "run.out", "run directory");

  add("evaluate", "per-tag and macro ROC-AUC of a checkpoint on one split", cmd::cmd_evaluate)
      .opt("--checkpoint", "eval.checkpoint", "checkpoint file")
      .opt("--manifest", "data.manifest", "manifest CSV")
      .opt("--features", "data.features", "feature root written by preprocess")
      .opt("--input", "frontend.kind", "feature kind (defaults to the checkpoint's)")
      .opt("--split", "data.split", "train, valid or test")
      .toggle("--roc", "eval.roc", "also write one ROC curve SVG per tag")
      .opt("--out", "run.out", "output directory");

  add("predict", "write tag scores for every clip of one split", cmd::cmd_predict)
      .opt("--checkpoint", "eval.checkpoint", "checkpoint file")
      .opt("--manifest", "data.manifest", "manifest CSV")
      .opt("--features", "data.features", "feature root written by preprocess")
      .opt("--input", "frontend.kind", "feature kind (defaults to the checkpoint's)")
      .opt("--split", "data.split", "train, valid or test")
      .opt("--out", "run.out", "output directory");

  add("inspect", "print the shape trace and parameter table of a model", cmd::cmd_inspect)
      .positional("model", "model.name", "model name")
      .opt("--input", "frontend.kind", "mel, stft or mfcc")
      .opt("--tags", "data.tags", "output size (default 50)");

  add("plot", "render learning curves and the bins-per-kHz chart", cmd::cmd_plot)
      .positional("dir", "run.out", "directory holding one or more runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? fcntag::kExitOk : fcntag::kExitUsage;
  }

  for (const auto& c : commands) {
    if (!c->parsed()) continue;
    try {
      c->run(std::cout);
      return fcntag::kExitOk;
    } catch (const fcntag::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return fcntag::exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
      std::cerr << "error (io): " << e.what() << "\n";
      return fcntag::kExitData;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return fcntag::kExitData;
    }
  }
  return fcntag::kExitUsage;
}
