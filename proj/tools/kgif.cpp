#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgif/kgif.hpp"

namespace {

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgif: knowledge-graph recommender with explicit information fusion"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::string output_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config key (key=value), repeatable");
    sub->add_option("--threads", threads, "worker cap for evaluation");
    sub->add_option("--seed", seed, "training seed");
    sub->add_option("-o,--output-dir", output_dir, "output directory");
  };

  auto* prepare = app.add_subcommand("prepare", "filter, split and summarize a dataset");
  add_common(prepare);

  std::string resume;
  auto* train = app.add_subcommand("train", "train a model and write history + checkpoint");
  add_common(train);
  train->add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);

  std::string checkpoint, fold_arg = "test";
  std::size_t k = 20;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a split");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--split", fold_arg)->check(CLI::IsMember({"test", "valid", "train"}));
  eval->add_option("--k", k)->check(CLI::PositiveNumber);

  std::string axis;
  auto* ablate = app.add_subcommand("ablate", "sweep one model axis on a fixed split");
  add_common(ablate);
  ablate->add_option("--axis", axis)->required()->check(CLI::IsMember({"fusion", "embed-mode", "layers", "aggregator"}));

  kgif::ExplainOptions explain_opt;
  std::optional<std::int64_t> item;
  std::string score_mode = "sum";
  auto* explain = app.add_subcommand("explain", "export attention paths from a user to an item");
  add_common(explain);
  explain->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  explain->add_option("--user", explain_opt.user)->required();
  explain->add_option("--item", item, "defaults to the user's top-1 recommendation");
  explain->add_option("--max-hops", explain_opt.max_hops)->check(CLI::Range(1, 4));
  explain->add_option("--top-p", explain_opt.top_p)->check(CLI::PositiveNumber);
  explain->add_option("--score", score_mode)->check(CLI::IsMember({"sum", "product"}));

  std::string synth_dir;
  std::uint64_t synth_seed = 7;
  auto* gen = app.add_subcommand("gen-synthetic", "write the planted-structure synthetic dataset");
  gen->add_option("--out", synth_dir)->required();
  gen->add_option("--seed", synth_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error kind=usage message=\"" << one_line(e.what()) << "\"\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      kgif::cmd_gen_synthetic(synth_dir, synth_seed, std::cout);
      return 0;
    }
    auto cfg = kgif::load_config(config_path);
    kgif::apply_environment(cfg);
    for (const auto& o : overrides) kgif::apply_override(cfg, o);
    if (threads) cfg.train.threads = *threads;
    if (seed) cfg.train.seed = *seed;
    if (!output_dir.empty()) cfg.output_dir = output_dir;

    if (prepare->parsed()) {
      kgif::cmd_prepare(cfg, std::cout);
    } else if (train->parsed()) {
      kgif::cmd_train(cfg, std::cout, resume);
    } else if (eval->parsed()) {
      const auto fold = fold_arg == "test" ? kgif::Fold::test
                        : fold_arg == "valid" ? kgif::Fold::validation
                                              : kgif::Fold::train;
      kgif::cmd_eval(cfg, checkpoint, fold, k, std::cout);
    } else if (ablate->parsed()) {
      kgif::cmd_ablate(cfg, axis, std::cout);
    } else if (explain->parsed()) {
      explain_opt.item = item;
      explain_opt.score = score_mode == "product" ? kgif::PathScore::product : kgif::PathScore::sum;
      kgif::cmd_explain(cfg, checkpoint, explain_opt, std::cout);
    }
  } catch (const kgif::Error& e) {
    std::cerr << "error kind=" << e.kind() << " message=\"" << one_line(e.what()) << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal message=\"" << one_line(e.what()) << "\"\n";
    return 1;
  }
  return 0;
}
