#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/recommender.hpp"

namespace kgif {

struct RunConfig {
  std::vector<std::string> interactions;
  std::string kg;
  std::string manifest;  // when set, the split is read from here instead of being recomputed
  std::size_t ncore = 10;
  bool inverse = true;
  SplitRatios ratios;
  std::uint64_t split_seed = 2024;
  ModelConfig model;
  TrainConfig train;
  std::string output_dir = "out";
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("bad value '" + v + "' for " + key);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <class E>
struct EnumName {
  E value;
  const char* name;
};

template <class E, std::size_t N>
E parse_enum(const std::string& key, const std::string& v, const EnumName<E> (&names)[N]) {
  for (const auto& n : names) {
    if (v == n.name) return n.value;
  }
  std::string allowed;
  for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : "|") + n.name;
  throw ConfigError("bad value '" + v + "' for " + key + " (expected " + allowed + ")");
}

template <class E, std::size_t N>
std::string enum_name(E e, const EnumName<E> (&names)[N]) {
  for (const auto& n : names) {
    if (n.value == e) return n.name;
  }
  return "?";
}

inline constexpr EnumName<EmbedMode> kEmbedModes[] = {{EmbedMode::transd, "transd"}, {EmbedMode::transr, "transr"}};
inline constexpr EnumName<LossOrder> kLossOrders[] = {{LossOrder::conventional, "conventional"},
                                                      {LossOrder::verbatim, "verbatim"}};
inline constexpr EnumName<FusionType> kFusionTypes[] = {{FusionType::multiplication, "multiplication"},
                                                        {FusionType::addition, "addition"},
                                                        {FusionType::concatenation, "concatenation"},
                                                        {FusionType::none, "none"}};
inline constexpr EnumName<FusionContext> kFusionContexts[] = {{FusionContext::mean, "mean"},
                                                              {FusionContext::per_triplet, "per_triplet"}};
inline constexpr EnumName<Aggregator> kAggregators[] = {{Aggregator::bi_interaction, "bi_interaction"},
                                                        {Aggregator::gcn, "gcn"},
                                                        {Aggregator::graphsage, "graphsage"}};
inline constexpr EnumName<TrainMode> kTrainModes[] = {{TrainMode::alternating, "alternating"},
                                                      {TrainMode::joint, "joint"}};

struct ConfigKey {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

template <class T>
std::string num(T v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto size_key = [&](const char* name, auto member) {
      k.push_back({name, [=](RunConfig& c, const std::string& v) { member(c) = parse_number<std::size_t>(name, v); },
                   [=](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }});
    };
    auto real_key = [&](const char* name, auto member) {
      k.push_back({name, [=](RunConfig& c, const std::string& v) { member(c) = parse_number<double>(name, v); },
                   [=](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }});
    };
    auto u64_key = [&](const char* name, auto member) {
      k.push_back({name, [=](RunConfig& c, const std::string& v) { member(c) = parse_number<std::uint64_t>(name, v); },
                   [=](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }});
    };
    auto enum_key = [&](const char* name, auto member, const auto& names) {
      k.push_back({name, [=, &names](RunConfig& c, const std::string& v) { member(c) = parse_enum(name, v, names); },
                   [=, &names](const RunConfig& c) { return enum_name(member(const_cast<RunConfig&>(c)), names); }});
    };
    k.push_back({"data.interactions", [](RunConfig& c, const std::string& v) { c.interactions = split_list(v); },
                 [](const RunConfig& c) { return join(c.interactions); }});
    k.push_back({"data.kg", [](RunConfig& c, const std::string& v) { c.kg = v; },
                 [](const RunConfig& c) { return c.kg; }});
    k.push_back({"data.manifest", [](RunConfig& c, const std::string& v) { c.manifest = v; },
                 [](const RunConfig& c) { return c.manifest; }});
    size_key("data.ncore", [](RunConfig& c) -> std::size_t& { return c.ncore; });
    k.push_back({"data.inverse", [](RunConfig& c, const std::string& v) { c.inverse = parse_bool("data.inverse", v); },
                 [](const RunConfig& c) { return std::string(c.inverse ? "true" : "false"); }});
    real_key("split.test", [](RunConfig& c) -> double& { return c.ratios.test; });
    real_key("split.valid", [](RunConfig& c) -> double& { return c.ratios.validation; });
    u64_key("split.seed", [](RunConfig& c) -> std::uint64_t& { return c.split_seed; });
    size_key("embed.dim", [](RunConfig& c) -> std::size_t& { return c.model.embed.dim; });
    enum_key("embed.mode", [](RunConfig& c) -> EmbedMode& { return c.model.embed.mode; }, kEmbedModes);
    enum_key("embed.loss_order", [](RunConfig& c) -> LossOrder& { return c.model.embed.loss_order; }, kLossOrders);
    enum_key("fusion.type", [](RunConfig& c) -> FusionType& { return c.model.fusion.type; }, kFusionTypes);
    k.push_back({"fusion.shared_weights",
                 [](RunConfig& c, const std::string& v) {
                   c.model.fusion.shared_weights = parse_bool("fusion.shared_weights", v);
                 },
                 [](const RunConfig& c) { return std::string(c.model.fusion.shared_weights ? "true" : "false"); }});
    enum_key("fusion.context", [](RunConfig& c) -> FusionContext& { return c.model.fusion.context; },
             kFusionContexts);
    k.push_back({"prop.dims",
                 [](RunConfig& c, const std::string& v) {
                   c.model.stack.dims.clear();
                   for (const auto& p : split_list(v)) c.model.stack.dims.push_back(parse_number<std::size_t>("prop.dims", p));
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> parts;
                   for (auto d : c.model.stack.dims) parts.push_back(std::to_string(d));
                   return join(parts);
                 }});
    enum_key("prop.aggregator", [](RunConfig& c) -> Aggregator& { return c.model.stack.aggregator; }, kAggregators);
    real_key("prop.dropout", [](RunConfig& c) -> double& { return c.model.stack.dropout; });
    real_key("train.lr", [](RunConfig& c) -> double& { return c.train.learning_rate; });
    size_key("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    real_key("train.lambda_user", [](RunConfig& c) -> double& { return c.train.lambda_user; });
    real_key("train.lambda_item", [](RunConfig& c) -> double& { return c.train.lambda_item; });
    size_key("train.patience", [](RunConfig& c) -> std::size_t& { return c.train.patience; });
    size_key("train.max_epochs", [](RunConfig& c) -> std::size_t& { return c.train.max_epochs; });
    size_key("train.k", [](RunConfig& c) -> std::size_t& { return c.train.k; });
    u64_key("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
    enum_key("train.mode", [](RunConfig& c) -> TrainMode& { return c.train.mode; }, kTrainModes);
    size_key("train.threads", [](RunConfig& c) -> std::size_t& { return c.train.threads; });
    k.push_back({"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const RunConfig& c) { return c.output_dir; }});
    return k;
  }();
  return keys;
}

}  // namespace detail

/// Applies one "key=value" assignment. Unknown keys are rejected.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys()) {
    if (key == k.key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set_config_value(cfg, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// "key = value" lines; '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.find('=') == std::string::npos) throw ParseError("expected key = value", line_no);
    try {
      apply_override(cfg, t);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
    }
  }
}

/// Relative data paths in a config file resolve against the file's directory.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str());
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) {
    const std::string dir = path.substr(0, slash + 1);
    auto fix = [&](std::string& p) {
      if (!p.empty() && p[0] != '/') p = dir + p;
    };
    for (auto& p : cfg.interactions) fix(p);
    fix(cfg.kg);
    fix(cfg.manifest);
  }
  return cfg;
}

/// KGIF_OUTPUT_DIR and KGIF_THREADS override the corresponding keys.
inline void apply_environment(RunConfig& cfg) {
  if (const char* dir = std::getenv("KGIF_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  if (const char* th = std::getenv("KGIF_THREADS"); th && *th) {
    cfg.train.threads = detail::parse_number<std::size_t>("KGIF_THREADS", th);
  }
}

/// Canonical text form: every key in declaration order.
inline std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : detail::config_keys()) out += std::string(k.key) + " = " + k.get(cfg) + "\n";
  return out;
}

inline void validate(const RunConfig& cfg) {
  if (cfg.model.embed.dim == 0) throw ConfigError("embed.dim must be positive");
  cfg.model.stack.validate();
  if (!(cfg.train.learning_rate > 0)) throw ConfigError("train.lr must be positive");
  if (cfg.train.patience == 0) throw ConfigError("train.patience must be at least 1");
  if (cfg.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (cfg.train.k == 0) throw ConfigError("train.k must be at least 1");
  if (cfg.train.lambda_user < 0 || cfg.train.lambda_item < 0) throw ConfigError("L2 coefficients must be >= 0");
  if (cfg.ratios.test < 0 || cfg.ratios.validation < 0 || cfg.ratios.test + cfg.ratios.validation >= 1.0) {
    throw ConfigError("split.test + split.valid must be in [0, 1)");
  }
  if (cfg.train.threads == 0) throw ConfigError("train.threads must be at least 1");
  if (cfg.manifest.empty() && cfg.interactions.empty()) throw ConfigError("data.interactions is required");
  if (cfg.kg.empty()) throw ConfigError("data.kg is required");
}

}  // namespace kgif
