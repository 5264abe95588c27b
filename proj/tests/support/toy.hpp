#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kgif/kgif.hpp"

namespace kgif::testing {

inline InteractionSet pairs_over(const std::vector<ExternalId>& users, const std::vector<ExternalId>& items,
                                 std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
  return InteractionSet::from_pairs(users, items, std::move(pairs));
}

/// 3 users, 3 items, 2 attributes, 2 KG relations: 8 entities.
inline CollaborativeKG toy_ckg(bool inverse = true) {
  const std::vector<ExternalId> users{10, 11, 12}, items{100, 101, 102};
  auto train = pairs_over(users, items, {{0, 0}, {0, 1}, {1, 1}, {2, 2}});
  auto test = pairs_over(users, items, {{0, 2}, {1, 0}});
  auto valid = pairs_over(users, items, {{2, 0}});
  KnowledgeTriples kg;
  kg.relation_ids = {5, 7};
  kg.triples = {{100, 0, 200}, {101, 0, 200}, {101, 1, 201}, {102, 1, 201}};
  return build_ckg(train, bind_knowledge(kg, items), inverse, &test, &valid);
}

/// A CKG whose only structure is the given KG chain over items; users
/// interact with a single item each.
inline CollaborativeKG chain_ckg(std::size_t length) {
  std::vector<ExternalId> items;
  for (std::size_t i = 0; i < length; ++i) items.push_back(static_cast<ExternalId>(i));
  const std::vector<ExternalId> users{1000};
  auto train = pairs_over(users, items, {{0, 0}});
  KnowledgeTriples kg;
  kg.relation_ids = {0};
  for (std::size_t i = 0; i + 1 < length; ++i) {
    kg.triples.push_back({static_cast<ExternalId>(i), 0, static_cast<ExternalId>(i + 1)});
  }
  return build_ckg(train, bind_knowledge(kg, items), false);
}

/// Generated clustered data, split 0.7/0.2/0.1, as a CKG with inverse edges.
inline CollaborativeKG synthetic_ckg(const SyntheticConfig& sc = {}, std::uint64_t split_seed = 2024) {
  const auto data = generate_synthetic(sc);
  std::vector<std::pair<ExternalId, ExternalId>> pairs;
  for (std::size_t u = 0; u < data.user_items.size(); ++u) {
    for (auto i : data.user_items[u]) pairs.emplace_back(static_cast<ExternalId>(u), static_cast<ExternalId>(i));
  }
  const auto s = split(interactions_from_external(pairs), {0.7, 0.2, 0.1}, split_seed);
  KnowledgeTriples kg;
  for (std::size_t r = 0; r < sc.relations; ++r) kg.relation_ids.push_back(static_cast<ExternalId>(r));
  for (const auto& t : data.triples) {
    kg.triples.push_back({static_cast<ExternalId>(t[0]), static_cast<RelationId>(t[1]), static_cast<ExternalId>(t[2])});
  }
  return build_ckg(s.train, bind_knowledge(kg, s.train.item_ids()), true, &s.test, &s.validation);
}

inline ModelConfig toy_model_config(std::size_t dim = 4) {
  ModelConfig cfg;
  cfg.embed.dim = dim;
  cfg.stack.dims = {3, 2};
  cfg.stack.dropout = 0.0;
  return cfg;
}

/// Worst relative error between analytic and central-difference gradients,
/// per named tensor. `loss` is evaluated on the live parameters.
template <class Params>
std::map<std::string, double> gradient_errors(Params& params, Params& grads, const std::function<double()>& loss,
                                              double eps = 1e-6, double floor = 1e-6) {
  std::map<std::string, double> out;
  auto ps = params.tensors();
  auto gs = grads.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto flat = ps[k].second->flat();
    Vector numeric(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double saved = flat[i];
      flat[i] = saved + eps;
      const double up = loss();
      flat[i] = saved - eps;
      const double down = loss();
      flat[i] = saved;
      numeric[i] = (up - down) / (2 * eps);
    }
    out[ps[k].first] = max_relative_error(gs[k].second->flat(), numeric, floor);
  }
  return out;
}

/// True when some entry of every tensor is non-zero.
template <class Params>
bool every_group_nonzero(Params& grads) {
  for (auto& [name, m] : grads.tensors()) {
    const auto f = m->flat();
    if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; })) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Independent metric oracle: sorts the whole list with a pair comparator and
// recomputes DCG from the definition.

inline std::vector<std::uint32_t> brute_rank(const std::vector<double>& scores, const std::vector<char>& excluded) {
  std::vector<std::pair<double, std::uint32_t>> v;
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    if (!excluded[i]) v.emplace_back(-scores[i], i);
  }
  std::sort(v.begin(), v.end());
  std::vector<std::uint32_t> out;
  for (auto& [s, i] : v) out.push_back(i);
  return out;
}

inline double brute_recall(const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& rel,
                           std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.size() && r < k; ++r) {
    for (auto x : rel) hits += x == ranked[r];
  }
  return static_cast<double>(hits) / static_cast<double>(rel.size());
}

inline double brute_ndcg(const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& rel,
                         std::size_t k) {
  double dcg = 0, idcg = 0;
  for (std::size_t r = 0; r < ranked.size() && r < k; ++r) {
    if (std::find(rel.begin(), rel.end(), ranked[r]) != rel.end()) dcg += std::log(2.0) / std::log(r + 2.0);
  }
  for (std::size_t r = 0; r < rel.size() && r < k; ++r) idcg += std::log(2.0) / std::log(r + 2.0);
  return dcg / idcg;
}

// ---------------------------------------------------------------------------
// Independent path oracle: grows every walk of length <= max_hops edge by
// edge over the flat triplet list, keeping those that are simple and end at
// the target.

struct BrutePath {
  std::vector<EntityId> nodes;
  std::vector<std::size_t> triplets;
};

inline std::vector<BrutePath> brute_paths(const CollaborativeKG& ckg, EntityId from, EntityId to,
                                          std::size_t max_hops) {
  std::vector<BrutePath> done, frontier{{{from}, {}}};
  const auto& trips = ckg.triplets();
  for (std::size_t hop = 0; hop < max_hops; ++hop) {
    std::vector<BrutePath> next;
    for (const auto& p : frontier) {
      for (std::size_t k = 0; k < trips.size(); ++k) {
        if (trips[k].head != p.nodes.back()) continue;
        if (std::find(p.nodes.begin(), p.nodes.end(), trips[k].tail) != p.nodes.end()) continue;
        BrutePath q = p;
        q.nodes.push_back(trips[k].tail);
        q.triplets.push_back(k);
        if (trips[k].tail == to) done.push_back(q);
        else next.push_back(q);
      }
    }
    frontier = std::move(next);
  }
  return done;
}

inline std::string temp_dir(const std::string& base, const std::string& name) {
  const auto dir = base + "/" + name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kgif::testing
