#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "kgif/error.hpp"
#include "kgif/numeric.hpp"

namespace kgif {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using ExternalId = std::int64_t;

// ---------------------------------------------------------------------------
// Line parsing helpers shared by the text readers.

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline ExternalId parse_id(std::string_view tok, std::size_t line_no) {
  ExternalId v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("expected integer id, got '" + std::string(tok) + "'", line_no);
  }
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

inline std::size_t index_of(const std::vector<ExternalId>& sorted_ids, ExternalId id) {
  auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), id);
  if (it == sorted_ids.end() || *it != id) return sorted_ids.size();
  return static_cast<std::size_t>(it - sorted_ids.begin());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// User-item interactions

/// Implicit-feedback interactions over contiguous user and item ids.
/// `user_ids` / `item_ids` map internal ids back to the ids in the input files
/// and are kept sorted ascending. Pairs are unique and sorted by (user, item).
class InteractionSet {
public:
  InteractionSet() = default;

  /// Builds from internal-id pairs; sorts and deduplicates.
  static InteractionSet from_pairs(std::vector<ExternalId> user_ids, std::vector<ExternalId> item_ids,
                                   std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
    InteractionSet s;
    s.user_ids_ = std::move(user_ids);
    s.item_ids_ = std::move(item_ids);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    s.offsets_.assign(s.user_ids_.size() + 1, 0);
    s.items_.reserve(pairs.size());
    for (auto [u, i] : pairs) {
      if (u >= s.user_ids_.size() || i >= s.item_ids_.size()) {
        throw DataError("interaction (" + std::to_string(u) + ", " + std::to_string(i) + ") out of range");
      }
      ++s.offsets_[u + 1];
      s.items_.push_back(i);
    }
    for (std::size_t u = 0; u < s.user_ids_.size(); ++u) s.offsets_[u + 1] += s.offsets_[u];
    return s;
  }

  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_items() const { return item_ids_.size(); }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const std::vector<ExternalId>& user_ids() const { return user_ids_; }
  const std::vector<ExternalId>& item_ids() const { return item_ids_; }

  std::span<const std::uint32_t> items_of(std::uint32_t user) const {
    return {items_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
  }

  bool contains(std::uint32_t user, std::uint32_t item) const {
    if (user >= num_users()) return false;
    auto items = items_of(user);
    return std::binary_search(items.begin(), items.end(), item);
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(size());
    for (std::uint32_t u = 0; u < num_users(); ++u) {
      for (auto i : items_of(u)) out.emplace_back(u, i);
    }
    return out;
  }

  std::vector<std::size_t> item_degrees() const {
    std::vector<std::size_t> deg(num_items(), 0);
    for (auto i : items_) ++deg[i];
    return deg;
  }

  friend bool operator==(const InteractionSet&, const InteractionSet&) = default;

private:
  std::vector<ExternalId> user_ids_;
  std::vector<ExternalId> item_ids_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> items_;
};

/// Builds an InteractionSet from external-id pairs, compacting ids in
/// ascending external order.
inline InteractionSet interactions_from_external(const std::vector<std::pair<ExternalId, ExternalId>>& ext) {
  std::vector<ExternalId> users, items;
  users.reserve(ext.size());
  items.reserve(ext.size());
  for (auto [u, i] : ext) {
    users.push_back(u);
    items.push_back(i);
  }
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(ext.size());
  for (auto [u, i] : ext) {
    pairs.emplace_back(static_cast<std::uint32_t>(detail::index_of(users, u)),
                       static_cast<std::uint32_t>(detail::index_of(items, i)));
  }
  return InteractionSet::from_pairs(std::move(users), std::move(items), std::move(pairs));
}

/// Reads user-major interaction files ("user item item ..." per line) and
/// merges them into one set.
inline InteractionSet load_interactions(const std::vector<std::string>& paths) {
  std::vector<std::pair<ExternalId, ExternalId>> ext;
  for (const auto& path : paths) {
    auto in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto toks = detail::split_ws(line);
      if (toks.empty()) continue;
      const ExternalId user = detail::parse_id(toks[0], line_no);
      for (std::size_t k = 1; k < toks.size(); ++k) ext.emplace_back(user, detail::parse_id(toks[k], line_no));
    }
  }
  if (ext.empty()) throw DataError("no interactions found in input");
  return interactions_from_external(ext);
}

inline InteractionSet load_interactions(const std::string& path) {
  return load_interactions(std::vector<std::string>{path});
}

/// Iteratively drops users and items with fewer than `n` interactions until
/// nothing changes, then re-compacts ids.
inline InteractionSet ncore_filter(const InteractionSet& inter, std::size_t n) {
  if (n == 0) throw DataError("ncore_filter: n must be at least 1");
  auto pairs = inter.pairs();
  std::vector<char> user_alive(inter.num_users(), 1), item_alive(inter.num_items(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::size_t> udeg(inter.num_users(), 0), ideg(inter.num_items(), 0);
    for (auto [u, i] : pairs) {
      ++udeg[u];
      ++ideg[i];
    }
    for (std::size_t u = 0; u < udeg.size(); ++u) {
      if (user_alive[u] && udeg[u] < n) {
        user_alive[u] = 0;
        changed = true;
      }
    }
    for (std::size_t i = 0; i < ideg.size(); ++i) {
      if (item_alive[i] && ideg[i] < n) {
        item_alive[i] = 0;
        changed = true;
      }
    }
    std::erase_if(pairs, [&](auto p) { return !user_alive[p.first] || !item_alive[p.second]; });
  }
  if (pairs.empty()) {
    throw DataError("ncore_filter: no interactions survive " + std::to_string(n) +
                    "-core filtering (dataset too sparse)");
  }
  std::vector<std::pair<ExternalId, ExternalId>> ext;
  ext.reserve(pairs.size());
  for (auto [u, i] : pairs) ext.emplace_back(inter.user_ids()[u], inter.item_ids()[i]);
  return interactions_from_external(ext);
}

// ---------------------------------------------------------------------------
// Train / test / validation split

struct SplitRatios {
  double train = 0.7;
  double test = 0.2;
  double validation = 0.1;
};

/// Three partitions over the same user and item id spaces.
struct DatasetSplit {
  InteractionSet train;
  InteractionSet test;
  InteractionSet validation;
};

enum class Fold { train, test, validation };

inline std::string_view fold_name(Fold f) {
  switch (f) {
    case Fold::train: return "train";
    case Fold::test: return "test";
    case Fold::validation: return "valid";
  }
  return "?";
}

/// Per-user random partition. Test and validation counts are floored; train
/// takes the remainder, so every user keeps at least one training pair.
inline DatasetSplit split(const InteractionSet& inter, SplitRatios ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.test + ratios.validation;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train <= 0 || ratios.test < 0 || ratios.validation < 0) {
    throw DataError("split: ratios must be non-negative and sum to 1");
  }
  Random rng(seed);
  std::array<std::vector<std::pair<std::uint32_t, std::uint32_t>>, 3> parts;
  for (std::uint32_t u = 0; u < inter.num_users(); ++u) {
    auto items = inter.items_of(u);
    if (items.empty()) throw DataError("split: user " + std::to_string(inter.user_ids()[u]) + " has no interactions");
    std::vector<std::uint32_t> order(items.begin(), items.end());
    rng.shuffle(order);
    const double n = static_cast<double>(order.size());
    auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
    auto n_val = static_cast<std::size_t>(std::floor(n * ratios.validation + 1e-9));
    while (n_test + n_val >= order.size() && n_test + n_val > 0) {
      if (n_val > 0) --n_val; else --n_test;
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t fold = k < n_test ? 1 : (k < n_test + n_val ? 2 : 0);
      parts[fold].emplace_back(u, order[k]);
    }
  }
  return {InteractionSet::from_pairs(inter.user_ids(), inter.item_ids(), std::move(parts[0])),
          InteractionSet::from_pairs(inter.user_ids(), inter.item_ids(), std::move(parts[1])),
          InteractionSet::from_pairs(inter.user_ids(), inter.item_ids(), std::move(parts[2]))};
}

/// Writes "user item fold" lines with external ids, train then test then
/// validation, each sorted by internal (user, item).
inline void write_split_manifest(const DatasetSplit& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  auto emit = [&](const InteractionSet& set, Fold fold) {
    for (auto [u, i] : set.pairs()) {
      out << set.user_ids()[u] << ' ' << set.item_ids()[i] << ' ' << fold_name(fold) << '\n';
    }
  };
  emit(s.train, Fold::train);
  emit(s.test, Fold::test);
  emit(s.validation, Fold::validation);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline DatasetSplit read_split_manifest(const std::string& path) {
  auto in = detail::open_input(path);
  std::array<std::vector<std::pair<ExternalId, ExternalId>>, 3> ext;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 3) throw ParseError("manifest line needs 'user item fold'", line_no);
    std::size_t fold = 3;
    if (toks[2] == "train") fold = 0;
    else if (toks[2] == "test") fold = 1;
    else if (toks[2] == "valid") fold = 2;
    else throw ParseError("unknown fold '" + std::string(toks[2]) + "'", line_no);
    ext[fold].emplace_back(detail::parse_id(toks[0], line_no), detail::parse_id(toks[1], line_no));
  }
  std::vector<std::pair<ExternalId, ExternalId>> all;
  for (const auto& f : ext) all.insert(all.end(), f.begin(), f.end());
  if (all.empty()) throw DataError("empty split manifest '" + path + "'");
  const auto universe = interactions_from_external(all);
  auto make = [&](const std::vector<std::pair<ExternalId, ExternalId>>& f) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (auto [u, i] : f) {
      pairs.emplace_back(static_cast<std::uint32_t>(detail::index_of(universe.user_ids(), u)),
                         static_cast<std::uint32_t>(detail::index_of(universe.item_ids(), i)));
    }
    return InteractionSet::from_pairs(universe.user_ids(), universe.item_ids(), std::move(pairs));
  };
  return {make(ext[0]), make(ext[1]), make(ext[2])};
}

// ---------------------------------------------------------------------------
// Knowledge graph triples

struct ExternalTriple {
  ExternalId head;
  RelationId relation;  // contiguous relation id
  ExternalId tail;
  friend auto operator<=>(const ExternalTriple&, const ExternalTriple&) = default;
};

/// Item-attribute triples as read from disk. Relation ids are compacted in
/// ascending external order; entity ids are still external.
struct KnowledgeTriples {
  std::vector<ExternalId> relation_ids;
  std::vector<ExternalTriple> triples;
};

inline KnowledgeTriples load_kg(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<std::tuple<ExternalId, ExternalId, ExternalId>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 3) throw ParseError("KG line needs 'head relation tail'", line_no);
    raw.emplace_back(detail::parse_id(toks[0], line_no), detail::parse_id(toks[1], line_no),
                     detail::parse_id(toks[2], line_no));
  }
  KnowledgeTriples kg;
  for (auto& [h, r, t] : raw) kg.relation_ids.push_back(r);
  std::sort(kg.relation_ids.begin(), kg.relation_ids.end());
  kg.relation_ids.erase(std::unique(kg.relation_ids.begin(), kg.relation_ids.end()), kg.relation_ids.end());
  kg.triples.reserve(raw.size());
  for (auto& [h, r, t] : raw) {
    kg.triples.push_back({h, static_cast<RelationId>(detail::index_of(kg.relation_ids, r)), t});
  }
  std::sort(kg.triples.begin(), kg.triples.end());
  kg.triples.erase(std::unique(kg.triples.begin(), kg.triples.end()), kg.triples.end());
  return kg;
}

struct Triplet {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// Knowledge triples resolved against an item vocabulary: items take ids
/// 0..N-1, every other entity becomes an attribute with id N + k.
struct BoundKnowledge {
  std::size_t num_items = 0;
  std::vector<ExternalId> attribute_ids;
  std::vector<ExternalId> relation_ids;
  std::vector<Triplet> triples;
};

inline BoundKnowledge bind_knowledge(const KnowledgeTriples& kg, const std::vector<ExternalId>& item_ids) {
  BoundKnowledge b;
  b.num_items = item_ids.size();
  b.relation_ids = kg.relation_ids;
  for (const auto& t : kg.triples) {
    for (ExternalId e : {t.head, t.tail}) {
      if (detail::index_of(item_ids, e) == item_ids.size()) b.attribute_ids.push_back(e);
    }
  }
  std::sort(b.attribute_ids.begin(), b.attribute_ids.end());
  b.attribute_ids.erase(std::unique(b.attribute_ids.begin(), b.attribute_ids.end()), b.attribute_ids.end());
  auto local = [&](ExternalId e) -> EntityId {
    const auto i = detail::index_of(item_ids, e);
    if (i < item_ids.size()) return static_cast<EntityId>(i);
    return static_cast<EntityId>(b.num_items + detail::index_of(b.attribute_ids, e));
  };
  b.triples.reserve(kg.triples.size());
  for (const auto& t : kg.triples) b.triples.push_back({local(t.head), t.relation, local(t.tail)});
  std::sort(b.triples.begin(), b.triples.end());
  b.triples.erase(std::unique(b.triples.begin(), b.triples.end()), b.triples.end());
  return b;
}

// ---------------------------------------------------------------------------
// Collaborative knowledge graph

enum class EntityKind { user, item, attribute };

/// One head entity and its outgoing (relation, tail) edges, sorted by
/// (relation, tail).
struct EgoNetwork {
  EntityId head = 0;
  std::vector<std::pair<RelationId, EntityId>> edges;
  std::size_t size() const { return edges.size(); }
  bool empty() const { return edges.empty(); }
};

/// Union of the training user-item graph and the item-attribute graph over a
/// shared entity space: users [0, M), items [M, M+N), attributes after that.
/// Relation 0 is "interact"; KG relation k is k+1; with inverse edges enabled
/// relation r has mirror r + base where base = 1 + #KG relations.
/// Immutable after construction.
class CollaborativeKG {
public:
  std::size_t num_users() const { return train_.num_users(); }
  std::size_t num_items() const { return train_.num_items(); }
  std::size_t num_attributes() const { return attribute_ids_.size(); }
  std::size_t num_entities() const { return num_users() + num_items() + num_attributes(); }
  std::size_t num_kg_relations() const { return kg_relation_ids_.size(); }
  std::size_t relation_base() const { return 1 + num_kg_relations(); }
  std::size_t num_relations() const { return relation_base() * (inverse_ ? 2 : 1); }
  bool has_inverse() const { return inverse_; }
  std::size_t num_triplets() const { return triplets_.size(); }

  static constexpr RelationId kInteract = 0;

  EntityId user_entity(std::uint32_t u) const { return u; }
  EntityId item_entity(std::uint32_t i) const { return static_cast<EntityId>(num_users() + i); }
  std::uint32_t item_of_entity(EntityId e) const { return static_cast<std::uint32_t>(e - num_users()); }

  EntityKind kind(EntityId e) const {
    if (e < num_users()) return EntityKind::user;
    if (e < num_users() + num_items()) return EntityKind::item;
    return EntityKind::attribute;
  }

  ExternalId external_id(EntityId e) const {
    switch (kind(e)) {
      case EntityKind::user: return train_.user_ids()[e];
      case EntityKind::item: return train_.item_ids()[e - num_users()];
      case EntityKind::attribute: return attribute_ids_[e - num_users() - num_items()];
    }
    return -1;
  }

  /// "user:17", "item:4", "entity:99".
  std::string entity_label(EntityId e) const {
    static constexpr const char* prefix[] = {"user:", "item:", "entity:"};
    return prefix[static_cast<int>(kind(e))] + std::to_string(external_id(e));
  }

  bool is_inverse(RelationId r) const { return inverse_ && r >= relation_base(); }
  RelationId inverse_of(RelationId r) const {
    if (!inverse_) throw DataError("graph has no inverse relations");
    return static_cast<RelationId>(is_inverse(r) ? r - relation_base() : r + relation_base());
  }

  std::string relation_name(RelationId r) const {
    const bool inv = is_inverse(r);
    const RelationId base = inv ? static_cast<RelationId>(r - relation_base()) : r;
    std::string name = base == kInteract ? "interact" : "r" + std::to_string(kg_relation_ids_[base - 1]);
    return inv ? name + "_inv" : name;
  }

  const std::vector<Triplet>& triplets() const { return triplets_; }

  /// Outgoing edges of h, sorted by (relation, tail).
  std::span<const Triplet> edges_of(EntityId h) const {
    return {triplets_.data() + head_offsets_[h], head_offsets_[h + 1] - head_offsets_[h]};
  }
  /// Index of the first edge of h in `triplets()`.
  std::size_t edge_offset(EntityId h) const { return head_offsets_[h]; }

  bool contains(EntityId h, RelationId r, EntityId t) const {
    if (h >= num_entities()) return false;
    auto edges = edges_of(h);
    return std::binary_search(edges.begin(), edges.end(), Triplet{h, r, t});
  }

  /// Position of (h, r, t) in `triplets()`, or num_triplets() when absent.
  std::size_t find(EntityId h, RelationId r, EntityId t) const {
    if (h >= num_entities()) return num_triplets();
    auto edges = edges_of(h);
    auto it = std::lower_bound(edges.begin(), edges.end(), Triplet{h, r, t});
    if (it == edges.end() || !(*it == Triplet{h, r, t})) return num_triplets();
    return head_offsets_[h] + static_cast<std::size_t>(it - edges.begin());
  }

  const InteractionSet& train() const { return train_; }
  const InteractionSet& test() const { return test_; }
  const InteractionSet& validation() const { return validation_; }
  const InteractionSet& holdout(Fold f) const {
    return f == Fold::test ? test_ : f == Fold::validation ? validation_ : train_;
  }

  const std::vector<ExternalId>& attribute_ids() const { return attribute_ids_; }
  const std::vector<ExternalId>& kg_relation_ids() const { return kg_relation_ids_; }

  /// Users with at least one training interaction.
  const std::vector<std::uint32_t>& active_users() const { return active_users_; }

  std::size_t num_kg_triplets() const { return num_kg_triplets_; }

private:
  friend CollaborativeKG build_ckg(const InteractionSet&, const BoundKnowledge&, bool, const InteractionSet*,
                                   const InteractionSet*);

  InteractionSet train_, test_, validation_;
  std::vector<ExternalId> attribute_ids_;
  std::vector<ExternalId> kg_relation_ids_;
  bool inverse_ = true;
  std::vector<Triplet> triplets_;
  std::vector<std::size_t> head_offsets_;
  std::vector<std::uint32_t> active_users_;
  std::size_t num_kg_triplets_ = 0;
};

/// Assembles the CKG. Interaction triplets come from `train` only; test and
/// validation sets are carried along for evaluation.
inline CollaborativeKG build_ckg(const InteractionSet& train, const BoundKnowledge& kg, bool inverse,
                                 const InteractionSet* test = nullptr, const InteractionSet* validation = nullptr) {
  if (kg.num_items != train.num_items()) {
    throw DataError("build_ckg: knowledge graph bound to " + std::to_string(kg.num_items) +
                    " items but interactions have " + std::to_string(train.num_items()));
  }
  for (const auto* other : {test, validation}) {
    if (other && (other->user_ids() != train.user_ids() || other->item_ids() != train.item_ids())) {
      throw DataError("build_ckg: holdout id spaces differ from train");
    }
  }
  CollaborativeKG g;
  g.train_ = train;
  g.test_ = test ? *test : InteractionSet::from_pairs(train.user_ids(), train.item_ids(), {});
  g.validation_ = validation ? *validation : InteractionSet::from_pairs(train.user_ids(), train.item_ids(), {});
  g.attribute_ids_ = kg.attribute_ids;
  g.kg_relation_ids_ = kg.relation_ids;
  g.inverse_ = inverse;

  const auto users = static_cast<EntityId>(train.num_users());
  const std::size_t n_entities = g.num_entities();
  const auto base = static_cast<RelationId>(g.relation_base());
  std::vector<Triplet> trips;
  trips.reserve((train.size() + kg.triples.size()) * (inverse ? 2 : 1));
  auto add = [&](EntityId h, RelationId r, EntityId t) {
    if (h >= n_entities || t >= n_entities) throw DataError("build_ckg: entity id out of range");
    trips.push_back({h, r, t});
    if (inverse) trips.push_back({t, static_cast<RelationId>(r + base), h});
  };
  for (auto [u, i] : train.pairs()) add(u, CollaborativeKG::kInteract, users + i);
  for (const auto& t : kg.triples) {
    if (t.relation >= kg.relation_ids.size()) throw DataError("build_ckg: relation id out of range");
    add(users + t.head, t.relation + 1, users + t.tail);
  }
  std::sort(trips.begin(), trips.end());
  trips.erase(std::unique(trips.begin(), trips.end()), trips.end());
  g.num_kg_triplets_ = kg.triples.size();
  g.triplets_ = std::move(trips);
  g.head_offsets_.assign(n_entities + 1, 0);
  for (const auto& t : g.triplets_) ++g.head_offsets_[t.head + 1];
  for (std::size_t e = 0; e < n_entities; ++e) g.head_offsets_[e + 1] += g.head_offsets_[e];
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    if (!train.items_of(u).empty()) g.active_users_.push_back(u);
  }
  return g;
}

inline EgoNetwork ego(const CollaborativeKG& ckg, EntityId h) {
  if (h >= ckg.num_entities()) throw DataError("ego: entity " + std::to_string(h) + " out of range");
  EgoNetwork net;
  net.head = h;
  for (const auto& t : ckg.edges_of(h)) net.edges.emplace_back(t.relation, t.tail);
  return net;
}

// ---------------------------------------------------------------------------
// Negative sampling

/// A tail t' with (h, r, t') absent from the graph. Rejection sampling over
/// all entities; after `max_attempts` misses the valid tails are enumerated.
inline EntityId sample_negative_tail(const CollaborativeKG& ckg, EntityId h, RelationId r, Random& rng,
                                     std::size_t max_attempts = 100) {
  const std::size_t n = ckg.num_entities();
  for (std::size_t a = 0; a < max_attempts; ++a) {
    const auto t = static_cast<EntityId>(rng.index(n));
    if (!ckg.contains(h, r, t)) return t;
  }
  std::vector<EntityId> valid;
  for (EntityId t = 0; t < n; ++t) {
    if (!ckg.contains(h, r, t)) valid.push_back(t);
  }
  if (valid.empty()) return static_cast<EntityId>(rng.index(n));
  return valid[rng.index(valid.size())];
}

struct BprTriple {
  std::uint32_t user;
  std::uint32_t positive;  // item ids in the interaction space
  std::uint32_t negative;
  friend bool operator==(const BprTriple&, const BprTriple&) = default;
};

inline BprTriple sample_bpr_triple(const CollaborativeKG& ckg, Random& rng, std::size_t max_attempts = 100) {
  const auto& users = ckg.active_users();
  if (users.empty()) throw DataError("sample_bpr_triple: empty training set");
  const std::size_t n_items = ckg.num_items();
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint32_t u = users[rng.index(users.size())];
    auto pos = ckg.train().items_of(u);
    const std::uint32_t i = pos[rng.index(pos.size())];
    if (pos.size() >= n_items) continue;
    for (std::size_t a = 0; a < max_attempts; ++a) {
      const auto j = static_cast<std::uint32_t>(rng.index(n_items));
      if (!std::binary_search(pos.begin(), pos.end(), j)) return {u, i, j};
    }
    std::vector<std::uint32_t> free;
    for (std::uint32_t j = 0; j < n_items; ++j) {
      if (!std::binary_search(pos.begin(), pos.end(), j)) free.push_back(j);
    }
    return {u, i, free[rng.index(free.size())]};
  }
  throw DataError("sample_bpr_triple: could not find a user with an unobserved item");
}

// ---------------------------------------------------------------------------
// Summary statistics in the shape of the usual dataset table.

struct GraphStats {
  std::size_t users = 0, items = 0, interactions = 0;
  std::size_t kg_entities = 0, kg_triplets = 0, kg_relations = 0;
  std::size_t ckg_entities = 0, ckg_triplets = 0, ckg_relations = 0;
  double interaction_density = 0, kg_density = 0, ckg_density = 0;
};

/// Densities: interactions / (users·items); KG triplets / (KG entities·items·relations);
/// CKG triplets / (CKG entities·items·relations). Interactions counts all folds.
inline GraphStats graph_stats(const CollaborativeKG& ckg) {
  GraphStats s;
  s.users = ckg.num_users();
  s.items = ckg.num_items();
  s.interactions = ckg.train().size() + ckg.test().size() + ckg.validation().size();
  s.kg_entities = ckg.num_items() + ckg.num_attributes();
  s.kg_triplets = ckg.num_kg_triplets();
  s.kg_relations = ckg.num_kg_relations();
  s.ckg_entities = ckg.num_entities();
  s.ckg_triplets = ckg.num_triplets();
  s.ckg_relations = ckg.num_relations();
  auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  s.interaction_density = ratio(static_cast<double>(s.interactions), static_cast<double>(s.users) * s.items);
  s.kg_density = ratio(static_cast<double>(s.kg_triplets),
                       static_cast<double>(s.kg_entities) * s.items * std::max<std::size_t>(s.kg_relations, 1));
  s.ckg_density = ratio(static_cast<double>(s.ckg_triplets),
                        static_cast<double>(s.ckg_entities) * s.items * s.ckg_relations);
  return s;
}

}  // namespace kgif
