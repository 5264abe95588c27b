#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/config.hpp"
#include "kgif/error.hpp"
#include "kgif/eval.hpp"
#include "kgif/explain.hpp"
#include "kgif/recommender.hpp"
#include "kgif/synthetic.hpp"

namespace kgif {

struct Dataset {
  DatasetSplit split;
  KnowledgeTriples kg;
  CollaborativeKG ckg;
};

inline Dataset load_dataset(const RunConfig& cfg) {
  Dataset d;
  if (!cfg.manifest.empty()) {
    d.split = read_split_manifest(cfg.manifest);
  } else {
    auto inter = load_interactions(cfg.interactions);
    if (cfg.ncore > 0) inter = ncore_filter(inter, cfg.ncore);
    SplitRatios ratios = cfg.ratios;
    ratios.train = 1.0 - ratios.test - ratios.validation;
    d.split = split(inter, ratios, cfg.split_seed);
  }
  d.kg = load_kg(cfg.kg);
  const auto bound = bind_knowledge(d.kg, d.split.train.item_ids());
  d.ckg = build_ckg(d.split.train, bound, cfg.inverse, &d.split.test, &d.split.validation);
  return d;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string format_stats(const GraphStats& s) {
  std::ostringstream os;
  os << "users=" << s.users << '\n'
     << "items=" << s.items << '\n'
     << "interactions=" << s.interactions << '\n'
     << "interaction_density=" << format_double(s.interaction_density) << '\n'
     << "kg_entities=" << s.kg_entities << '\n'
     << "kg_relations=" << s.kg_relations << '\n'
     << "kg_triplets=" << s.kg_triplets << '\n'
     << "kg_density=" << format_double(s.kg_density) << '\n'
     << "ckg_entities=" << s.ckg_entities << '\n'
     << "ckg_relations=" << s.ckg_relations << '\n'
     << "ckg_triplets=" << s.ckg_triplets << '\n'
     << "ckg_density=" << format_double(s.ckg_density) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

/// Filters and splits the raw data, writing manifest.txt and stats.txt.
inline GraphStats cmd_prepare(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const auto data = load_dataset(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  write_split_manifest(data.split, cfg.output_dir + "/manifest.txt");
  const auto stats = graph_stats(data.ckg);
  write_file(cfg.output_dir + "/stats.txt", format_stats(stats));
  log << format_stats(stats);
  return stats;
}

struct TrainOutcome {
  TrainResult result;
  MetricReport test;
};

/// Trains, then writes history.txt, checkpoint.bin (+ .manifest) and the
/// test report of the best-validation parameters into the output directory.
inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log, const std::string& resume = {}) {
  validate(cfg);
  const auto data = load_dataset(cfg);
  const auto& ckg = data.ckg;
  std::filesystem::create_directories(cfg.output_dir);
  const std::string history_path = cfg.output_dir + "/history.txt";
  const std::string ckpt_path = cfg.output_dir + "/checkpoint.bin";

  std::optional<ModelParams> initial;
  std::size_t start_epoch = 0;
  ModelConfig model_cfg = cfg.model;
  if (!resume.empty()) {
    auto ck = load_checkpoint(resume);
    check_compatible(ck, ckg);
    model_cfg = ck.config;
    initial = std::move(ck.params);
    start_epoch = ck.meta.epochs_run;
  }

  std::ofstream history(history_path, std::ios::binary | (resume.empty() ? std::ios::trunc : std::ios::app));
  if (!history) throw IoError("cannot write '" + history_path + "'");
  auto on_epoch = [&](const EpochRecord& r) {
    history << format_history({r}, cfg.train.k);
    history.flush();
  };

  auto meta = checkpoint_meta_for(ckg);
  meta.run_config = config_to_text(cfg);
  auto save = [&](const TrainResult& r) {
    meta.epochs_run = r.epochs_run;
    meta.best_epoch = r.best_epoch;
    meta.best_recall = r.best_recall;
    meta.best_ndcg = r.best_ndcg;
    save_checkpoint(ckpt_path, model_cfg, r.params, meta);
  };

  TrainOutcome out;
  try {
    out.result = train(ckg, model_cfg, cfg.train, std::move(initial), start_epoch, on_epoch);
  } catch (const TrainingDiverged& e) {
    save(e.last_good());
    throw;
  }
  save(out.result);
  Recommender model(ckg, model_cfg, out.result.params);
  out.test = evaluate(model.representations(), ckg, Fold::test, cfg.train.k, true, cfg.train.threads);
  write_metric_report(out.test, ckg, cfg.output_dir + "/test");
  log << "best_epoch=" << out.result.best_epoch << " epochs_run=" << out.result.epochs_run
      << " valid_recall@" << cfg.train.k << '=' << format_double(out.result.best_recall) << " test_recall@"
      << cfg.train.k << '=' << format_double(out.test.recall) << " test_ndcg@" << cfg.train.k << '='
      << format_double(out.test.ndcg) << '\n';
  return out;
}

inline MetricReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint, Fold fold, std::size_t k,
                             std::ostream& log) {
  validate(cfg);
  const auto data = load_dataset(cfg);
  auto ck = load_checkpoint(checkpoint);
  check_compatible(ck, data.ckg);
  Recommender model(data.ckg, ck.config, std::move(ck.params));
  const auto rep = evaluate(model.representations(), data.ckg, fold, k, true, cfg.train.threads);
  std::filesystem::create_directories(cfg.output_dir);
  write_metric_report(rep, data.ckg, cfg.output_dir + "/eval_" + std::string(fold_name(fold)));
  log << "fold=" << fold_name(fold) << " users=" << rep.user_count() << " recall@" << k << '='
      << format_double(rep.recall) << " ndcg@" << k << '=' << format_double(rep.ndcg) << '\n';
  return rep;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
  std::string name;
  ModelConfig model;
};

struct AblationRow {
  std::string name;
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t best_epoch = 0;
  std::string manifest_hash;
};

inline std::vector<AblationVariant> ablation_variants(const ModelConfig& base, const std::string& axis) {
  std::vector<AblationVariant> out;
  auto with = [&](std::string name, auto&& edit) {
    ModelConfig m = base;
    edit(m);
    out.push_back({std::move(name), std::move(m)});
  };
  if (axis == "fusion") {
    with("Without fusion", [](ModelConfig& m) { m.fusion.type = FusionType::none; m.fusion.shared_weights = false; });
    const std::pair<FusionType, const char*> types[] = {{FusionType::addition, "Addition"},
                                                        {FusionType::concatenation, "Concatenation"},
                                                        {FusionType::multiplication, "Multiplication"}};
    for (const auto& [type, label] : types) {
      for (bool shared : {true, false}) {
        with(std::string(label) + (shared ? " (shared)" : ""), [&](ModelConfig& m) {
          m.fusion.type = type;
          m.fusion.shared_weights = shared;
        });
      }
    }
  } else if (axis == "embed-mode") {
    with("TransD", [](ModelConfig& m) { m.embed.mode = EmbedMode::transd; });
    with("TransR", [](ModelConfig& m) { m.embed.mode = EmbedMode::transr; });
  } else if (axis == "layers") {
    const std::size_t dims[] = {64, 32, 16, 8, 4};
    for (std::size_t l = 1; l <= 5; ++l) {
      with(std::to_string(l) + "-Layer", [&](ModelConfig& m) { m.stack.dims.assign(dims, dims + l); });
    }
  } else if (axis == "aggregator") {
    with("Bi-Interaction", [](ModelConfig& m) { m.stack.aggregator = Aggregator::bi_interaction; });
    with("GCN", [](ModelConfig& m) { m.stack.aggregator = Aggregator::gcn; });
    with("GraphSage", [](ModelConfig& m) { m.stack.aggregator = Aggregator::graphsage; });
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (expected fusion|embed-mode|layers|aggregator)");
  }
  return out;
}

inline std::string format_ablation(const std::string& axis, std::size_t k, const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "# axis=" << axis << '\n';
  os << std::left << std::setw(26) << "variant" << std::setw(12) << ("recall@" + std::to_string(k)) << std::setw(12)
     << ("ndcg@" + std::to_string(k)) << std::setw(12) << "best_epoch" << "manifest" << '\n';
  for (const auto& r : rows) {
    std::ostringstream rc, nd;
    rc << std::fixed << std::setprecision(4) << r.recall;
    nd << std::fixed << std::setprecision(4) << r.ndcg;
    os << std::left << std::setw(26) << r.name << std::setw(12) << rc.str() << std::setw(12) << nd.str()
       << std::setw(12) << r.best_epoch << r.manifest_hash << '\n';
  }
  return os.str();
}

/// Trains every variant of the axis on one fixed split and seed and writes
/// ablate_<axis>.txt.
inline std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const std::string& axis, std::ostream& log) {
  validate(cfg);
  const auto variants = ablation_variants(cfg.model, axis);
  const auto data = load_dataset(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string manifest_path = cfg.output_dir + "/manifest.txt";
  write_split_manifest(data.split, manifest_path);
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    // Re-read the manifest each row so the logged hash reflects what was used.
    const auto hash = hex64(fnv1a(read_file(manifest_path)));
    auto result = train(data.ckg, v.model, cfg.train);
    Recommender model(data.ckg, v.model, std::move(result.params));
    const auto rep = evaluate(model.representations(), data.ckg, Fold::test, cfg.train.k, true, cfg.train.threads);
    rows.push_back({v.name, rep.recall, rep.ndcg, result.best_epoch, hash});
    log << "variant=\"" << v.name << "\" recall@" << cfg.train.k << '=' << format_double(rep.recall) << " ndcg@"
        << cfg.train.k << '=' << format_double(rep.ndcg) << " manifest=" << hash << '\n';
  }
  write_file(cfg.output_dir + "/ablate_" + axis + ".txt", format_ablation(axis, cfg.train.k, rows));
  return rows;
}

// ---------------------------------------------------------------------------
// Explanation

/// Error text naming up to three known ids closest to `id`.
inline std::string nearest_ids_message(const std::string& what, ExternalId id, const std::vector<ExternalId>& known) {
  std::vector<ExternalId> sorted = known;
  std::sort(sorted.begin(), sorted.end(), [&](ExternalId a, ExternalId b) {
    const auto da = a > id ? a - id : id - a, db = b > id ? b - id : id - b;
    return da != db ? da < db : a < b;
  });
  if (sorted.size() > 3) sorted.resize(3);
  std::string msg = "unknown " + what + " id " + std::to_string(id) + "; nearest known:";
  for (auto k : sorted) msg += " " + std::to_string(k);
  return msg;
}

struct ExplainOptions {
  ExternalId user = 0;
  std::optional<ExternalId> item;
  std::size_t max_hops = 3;
  std::size_t top_p = 5;
  PathScore score = PathScore::sum;
};

inline ExplanationReport cmd_explain(const RunConfig& cfg, const std::string& checkpoint, const ExplainOptions& opt,
                                     std::ostream& log) {
  validate(cfg);
  const auto data = load_dataset(cfg);
  const auto& ckg = data.ckg;
  auto ck = load_checkpoint(checkpoint);
  check_compatible(ck, ckg);
  Recommender model(ckg, ck.config, std::move(ck.params));

  const auto& users = ckg.train().user_ids();
  const auto u = detail::index_of(users, opt.user);
  if (u == users.size()) throw DataError(nearest_ids_message("user", opt.user, users));
  const auto attention = model.attention();
  const auto reps = model.forward(attention, false, nullptr).reps;
  std::uint32_t item = 0;
  if (opt.item) {
    const auto& items = ckg.train().item_ids();
    const auto i = detail::index_of(items, *opt.item);
    if (i == items.size()) throw DataError(nearest_ids_message("item", *opt.item, items));
    item = static_cast<std::uint32_t>(i);
  } else {
    const auto top = top_k_items(reps, ckg, static_cast<std::uint32_t>(u), 1);
    if (top.empty()) throw DataError("user " + std::to_string(opt.user) + " has no unseen items to explain");
    item = top.front();
  }
  auto report = extract_paths(ckg, attention, ckg.user_entity(static_cast<std::uint32_t>(u)),
                              ckg.item_entity(item), opt.max_hops, opt.top_p, opt.score);
  report.prediction = predict(reps.users.row(u), reps.items.row(item));
  std::filesystem::create_directories(cfg.output_dir);
  const std::string stem = cfg.output_dir + "/explain_u" + std::to_string(opt.user) + "_i" +
                           std::to_string(ckg.train().item_ids()[item]);
  export_graph(report, ckg, ExportFormat::dot, stem + ".dot");
  export_graph(report, ckg, ExportFormat::jsonl, stem + ".jsonl");
  log << "user=" << opt.user << " item=" << ckg.train().item_ids()[item] << " score=" << format_double(report.prediction)
      << " paths=" << report.paths.size() << " dot=" << stem << ".dot\n";
  return report;
}

inline void cmd_gen_synthetic(const std::string& dir, std::uint64_t seed, std::ostream& log) {
  SyntheticConfig sc;
  sc.seed = seed;
  const auto data = generate_synthetic(sc);
  write_synthetic(data, dir);
  log << "wrote " << sc.users << " users, " << sc.items << " items, " << sc.attributes << " attributes to " << dir
      << '\n';
}

}  // namespace kgif
