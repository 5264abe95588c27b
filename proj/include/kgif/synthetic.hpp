#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kgif/error.hpp"
#include "kgif/numeric.hpp"

namespace kgif {

/// Planted-structure dataset: items and attributes are split into clusters,
/// each item links to attributes of its own cluster, and each user draws
/// most interactions from one preferred cluster.
struct SyntheticConfig {
  std::size_t users = 200;
  std::size_t items = 100;
  std::size_t attributes = 50;
  std::size_t clusters = 5;
  std::size_t relations = 3;
  std::size_t cluster_interactions = 12;
  std::size_t noise_interactions = 2;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  std::vector<std::vector<std::int64_t>> user_items;  // index = user external id
  std::vector<std::array<std::int64_t, 3>> triples;   // (head, relation, tail) external ids
  std::vector<std::size_t> item_cluster;
  std::vector<std::size_t> user_cluster;
};

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.clusters == 0 || cfg.items % cfg.clusters != 0 || cfg.attributes % cfg.clusters != 0) {
    throw ConfigError("synthetic: items and attributes must divide evenly into clusters");
  }
  const std::size_t per_items = cfg.items / cfg.clusters;
  const std::size_t per_attrs = cfg.attributes / cfg.clusters;
  if (cfg.cluster_interactions > per_items) throw ConfigError("synthetic: more cluster interactions than cluster items");
  if (cfg.relations == 0 || per_attrs < 3) throw ConfigError("synthetic: need relations and >= 3 attributes per cluster");
  Random rng(cfg.seed);
  SyntheticData d;
  d.item_cluster.resize(cfg.items);
  for (std::size_t i = 0; i < cfg.items; ++i) d.item_cluster[i] = i / per_items;

  // Attribute external ids follow the items.
  const auto attr_base = static_cast<std::int64_t>(cfg.items);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    const std::size_t c = d.item_cluster[i];
    std::vector<std::size_t> local(per_attrs);
    for (std::size_t a = 0; a < per_attrs; ++a) local[a] = a;
    rng.shuffle(local);
    const std::size_t links = 2 + rng.index(2);
    for (std::size_t k = 0; k < links; ++k) {
      const auto attr = attr_base + static_cast<std::int64_t>(c * per_attrs + local[k]);
      const auto rel = static_cast<std::int64_t>(rng.index(cfg.relations));
      d.triples.push_back({static_cast<std::int64_t>(i), rel, attr});
    }
  }

  d.user_cluster.resize(cfg.users);
  d.user_items.resize(cfg.users);
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::size_t c = u % cfg.clusters;
    d.user_cluster[u] = c;
    std::vector<std::int64_t> pool(per_items);
    for (std::size_t k = 0; k < per_items; ++k) pool[k] = static_cast<std::int64_t>(c * per_items + k);
    rng.shuffle(pool);
    std::vector<std::int64_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.cluster_interactions));
    std::size_t noise = 0;
    while (noise < cfg.noise_interactions) {
      const auto i = static_cast<std::int64_t>(rng.index(cfg.items));
      if (d.item_cluster[static_cast<std::size_t>(i)] == c) continue;
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      chosen.push_back(i);
      ++noise;
    }
    std::sort(chosen.begin(), chosen.end());
    d.user_items[u] = std::move(chosen);
  }
  return d;
}

/// Writes interactions.txt, kg.txt and a ready-to-use config.txt into `dir`.
inline void write_synthetic(const SyntheticData& d, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw IoError("cannot write '" + dir + "/" + name + "'");
    return out;
  };
  {
    auto out = open("interactions.txt");
    for (std::size_t u = 0; u < d.user_items.size(); ++u) {
      out << u;
      for (auto i : d.user_items[u]) out << ' ' << i;
      out << '\n';
    }
  }
  {
    auto out = open("kg.txt");
    for (const auto& t : d.triples) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  auto out = open("config.txt");
  out << "# planted-structure synthetic dataset\n"
      << "data.interactions = interactions.txt\n"
      << "data.kg = kg.txt\n"
      << "split.test = 0.2\n"
      << "split.valid = 0.1\n";
}

}  // namespace kgif
