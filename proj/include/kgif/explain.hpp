#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/propagation.hpp"

namespace kgif {

enum class PathScore { sum, product };

struct PathEdge {
  EntityId head;
  RelationId relation;
  EntityId tail;
  double weight;
};

struct ExplanationPath {
  std::vector<EntityId> nodes;
  std::vector<PathEdge> edges;
  double score = 0.0;

  std::size_t hops() const { return edges.size(); }
};

struct ExplanationReport {
  EntityId user = 0;
  EntityId item = 0;
  double prediction = 0.0;
  std::vector<ExplanationPath> paths;
};

namespace detail {

inline std::vector<RelationId> relation_sequence(const ExplanationPath& p) {
  std::vector<RelationId> r;
  for (const auto& e : p.edges) r.push_back(e.relation);
  return r;
}

/// Best score first, then lexicographic node sequence, then relation sequence.
inline bool path_before(const ExplanationPath& a, const ExplanationPath& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.nodes != b.nodes) return a.nodes < b.nodes;
  return relation_sequence(a) < relation_sequence(b);
}

}  // namespace detail

/// Every simple path from `user` to `item` with at most `max_hops` edges,
/// scored from the attention of its edges; the best `top_p` are kept.
inline ExplanationReport extract_paths(const CollaborativeKG& ckg, const AttentionIndex& attention, EntityId user,
                                       EntityId item, std::size_t max_hops, std::size_t top_p,
                                       PathScore mode = PathScore::sum) {
  if (max_hops < 1 || max_hops > 4) throw ConfigError("max_hops must be in [1, 4]");
  if (user >= ckg.num_entities() || item >= ckg.num_entities()) throw DataError("extract_paths: entity out of range");
  if (attention.weights.size() != ckg.num_triplets()) throw DimensionError("extract_paths: attention size mismatch");
  ExplanationReport report;
  report.user = user;
  report.item = item;
  std::vector<ExplanationPath> found;
  std::vector<char> on_path(ckg.num_entities(), 0);
  ExplanationPath cur;
  cur.nodes.push_back(user);
  on_path[user] = 1;

  auto dfs = [&](auto&& self, EntityId h) -> void {
    if (cur.edges.size() == max_hops) return;
    const std::size_t off = ckg.edge_offset(h);
    const auto edges = ckg.edges_of(h);
    for (std::size_t j = 0; j < edges.size(); ++j) {
      const auto& t = edges[j];
      if (on_path[t.tail]) continue;
      cur.edges.push_back({t.head, t.relation, t.tail, attention.weights[off + j]});
      cur.nodes.push_back(t.tail);
      if (t.tail == item) {
        found.push_back(cur);
      } else {
        on_path[t.tail] = 1;
        self(self, t.tail);
        on_path[t.tail] = 0;
      }
      cur.nodes.pop_back();
      cur.edges.pop_back();
    }
  };
  if (user != item) dfs(dfs, user);

  for (auto& p : found) {
    double s = mode == PathScore::sum ? 0.0 : 1.0;
    for (const auto& e : p.edges) s = mode == PathScore::sum ? s + e.weight : s * e.weight;
    p.score = s;
  }
  std::sort(found.begin(), found.end(), detail::path_before);
  if (found.size() > top_p) found.resize(top_p);
  report.paths = std::move(found);
  return report;
}

// ---------------------------------------------------------------------------
// Export

enum class ExportFormat { dot, jsonl };

inline std::string weight_label(double w) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << w;
  return os.str();
}

/// Graphviz text. Nodes and edges shared by several paths appear once.
inline std::string to_dot(const ExplanationReport& report, const CollaborativeKG& ckg) {
  std::ostringstream os;
  os << "digraph explanation {\n";
  os << "  // user=" << ckg.entity_label(report.user) << " item=" << ckg.entity_label(report.item) << '\n';
  std::vector<EntityId> nodes;
  std::vector<PathEdge> edges;
  for (const auto& p : report.paths) {
    for (auto n : p.nodes) {
      if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
    }
    for (const auto& e : p.edges) {
      auto same = [&](const PathEdge& x) {
        return x.head == e.head && x.relation == e.relation && x.tail == e.tail;
      };
      if (std::find_if(edges.begin(), edges.end(), same) == edges.end()) edges.push_back(e);
    }
  }
  for (auto n : nodes) os << "  \"" << ckg.entity_label(n) << "\";\n";
  for (const auto& e : edges) {
    os << "  \"" << ckg.entity_label(e.head) << "\" -> \"" << ckg.entity_label(e.tail) << "\" [label=\""
       << ckg.relation_name(e.relation) << ' ' << weight_label(e.weight) << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

/// One JSON record per path with full-precision weights.
inline std::string to_jsonl(const ExplanationReport& report, const CollaborativeKG& ckg) {
  std::ostringstream os;
  for (std::size_t k = 0; k < report.paths.size(); ++k) {
    const auto& p = report.paths[k];
    nlohmann::ordered_json rec;
    rec["rank"] = k + 1;
    rec["user"] = ckg.entity_label(report.user);
    rec["item"] = ckg.entity_label(report.item);
    rec["score"] = p.score;
    auto& nodes = rec["nodes"] = nlohmann::ordered_json::array();
    for (auto n : p.nodes) nodes.push_back(ckg.entity_label(n));
    auto& edges = rec["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : p.edges) {
      edges.push_back({{"head", e.head},
                       {"relation", e.relation},
                       {"tail", e.tail},
                       {"relation_name", ckg.relation_name(e.relation)},
                       {"weight", e.weight}});
    }
    os << rec.dump() << '\n';
  }
  return os.str();
}

inline void export_graph(const ExplanationReport& report, const CollaborativeKG& ckg, ExportFormat format,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << (format == ExportFormat::dot ? to_dot(report, ckg) : to_jsonl(report, ckg));
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace kgif
