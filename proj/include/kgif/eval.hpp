#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/numeric.hpp"

namespace kgif {

/// Concatenated multi-layer representations u*, i* for every user and item.
struct FinalRepresentations {
  Matrix users;
  Matrix items;
  std::size_t dim() const { return users.cols(); }
};

/// ŷ(u, i) = u*ᵀ i*.
inline double predict(std::span<const double> user, std::span<const double> item) {
  if (user.size() != item.size()) throw DimensionError("predict: representation dims differ");
  return dot(user, item);
}

// ---------------------------------------------------------------------------
// Ranking

struct RankingResult {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> items;
  std::vector<double> scores;
};

namespace detail {

/// Higher score first; equal scores by ascending item id.
struct RankOrder {
  const std::vector<double>* scores;
  bool operator()(std::uint32_t a, std::uint32_t b) const {
    const double sa = (*scores)[a], sb = (*scores)[b];
    if (sa != sb) return sa > sb;
    return a < b;
  }
};

inline std::vector<double> score_all(const FinalRepresentations& reps, std::uint32_t u) {
  std::vector<double> s(reps.items.rows());
  auto ur = reps.users.row(u);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = predict(ur, reps.items.row(i));
  return s;
}

inline std::vector<std::uint32_t> candidates(const CollaborativeKG& ckg, std::uint32_t u, bool exclude_train) {
  std::vector<std::uint32_t> c;
  c.reserve(ckg.num_items());
  for (std::uint32_t i = 0; i < ckg.num_items(); ++i) {
    if (!exclude_train || !ckg.train().contains(u, i)) c.push_back(i);
  }
  return c;
}

}  // namespace detail

/// Full ranking of the items u has not trained on.
inline RankingResult rank_items(const FinalRepresentations& reps, const CollaborativeKG& ckg, std::uint32_t u,
                                bool exclude_train = true) {
  const auto scores = detail::score_all(reps, u);
  RankingResult r;
  r.user = u;
  r.items = detail::candidates(ckg, u, exclude_train);
  std::sort(r.items.begin(), r.items.end(), detail::RankOrder{&scores});
  r.scores.reserve(r.items.size());
  for (auto i : r.items) r.scores.push_back(scores[i]);
  return r;
}

/// The first k entries of rank_items without sorting the whole catalogue.
inline std::vector<std::uint32_t> top_k_items(const FinalRepresentations& reps, const CollaborativeKG& ckg,
                                              std::uint32_t u, std::size_t k, bool exclude_train = true) {
  const auto scores = detail::score_all(reps, u);
  auto c = detail::candidates(ckg, u, exclude_train);
  const std::size_t n = std::min(k, c.size());
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n), c.end(), detail::RankOrder{&scores});
  c.resize(n);
  return c;
}

// ---------------------------------------------------------------------------
// Metrics. `relevant` must be sorted.

inline double recall_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                          std::size_t k) {
  if (k == 0) throw DataError("recall_at_k: k must be at least 1");
  if (relevant.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// Binary-gain NDCG: Σ 1/log2(rank+1) over hits in the top k, divided by the
/// ideal value for min(|relevant|, k) hits.
inline double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                        std::size_t k) {
  if (k == 0) throw DataError("ndcg_at_k: k must be at least 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[r])) dcg += 1.0 / std::log2(r + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, relevant.size()); ++r) idcg += 1.0 / std::log2(r + 2.0);
  return dcg / idcg;
}

struct UserMetrics {
  std::uint32_t user;
  std::size_t relevant;
  double recall;
  double ndcg;
};

struct MetricReport {
  std::size_t k = 20;
  Fold fold = Fold::test;
  double recall = 0.0;
  double ndcg = 0.0;
  std::vector<UserMetrics> per_user;
  std::size_t user_count() const { return per_user.size(); }
};

/// Runs fn(begin, end) over [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

/// Recall@k and NDCG@k over users with at least one item in `fold`. Means are
/// accumulated in user order so the result does not depend on `threads`.
inline MetricReport evaluate(const FinalRepresentations& reps, const CollaborativeKG& ckg, Fold fold, std::size_t k,
                             bool exclude_train = true, std::size_t threads = 1) {
  if (k == 0) throw DataError("evaluate: k must be at least 1");
  const auto& target = ckg.holdout(fold);
  std::vector<std::uint32_t> users;
  for (std::uint32_t u = 0; u < target.num_users(); ++u) {
    if (!target.items_of(u).empty()) users.push_back(u);
  }
  if (users.empty()) throw DataError("evaluate: no user has items in the '" + std::string(fold_name(fold)) + "' fold");
  std::vector<UserMetrics> rows(users.size());
  parallel_for(users.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t idx = b; idx < e; ++idx) {
      const auto u = users[idx];
      const auto top = top_k_items(reps, ckg, u, k, exclude_train);
      const auto rel = target.items_of(u);
      rows[idx] = {u, rel.size(), recall_at_k(top, rel, k), ndcg_at_k(top, rel, k)};
    }
  });
  MetricReport rep;
  rep.k = k;
  rep.fold = fold;
  for (const auto& r : rows) {
    rep.recall += r.recall;
    rep.ndcg += r.ndcg;
  }
  rep.recall /= static_cast<double>(rows.size());
  rep.ndcg /= static_cast<double>(rows.size());
  rep.per_user = std::move(rows);
  return rep;
}

/// Expected Recall@k of a uniformly random ranking, averaged like evaluate().
inline double random_recall_baseline(const CollaborativeKG& ckg, Fold fold, std::size_t k) {
  const auto& target = ckg.holdout(fold);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint32_t u = 0; u < target.num_users(); ++u) {
    if (target.items_of(u).empty()) continue;
    const double cand = static_cast<double>(ckg.num_items() - ckg.train().items_of(u).size());
    sum += std::min(1.0, static_cast<double>(k) / cand);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Writes `<prefix>.summary.txt` (key=value lines) and `<prefix>.users.jsonl`
/// (one JSON record per user followed by a summary record).
inline void write_metric_report(const MetricReport& rep, const CollaborativeKG& ckg, const std::string& prefix) {
  {
    std::ofstream out(prefix + ".summary.txt", std::ios::binary);
    if (!out) throw IoError("cannot write '" + prefix + ".summary.txt'");
    out << "fold=" << fold_name(rep.fold) << '\n'
        << "k=" << rep.k << '\n'
        << "users=" << rep.user_count() << '\n'
        << "recall@" << rep.k << '=' << format_double(rep.recall) << '\n'
        << "ndcg@" << rep.k << '=' << format_double(rep.ndcg) << '\n';
  }
  std::ofstream out(prefix + ".users.jsonl", std::ios::binary);
  if (!out) throw IoError("cannot write '" + prefix + ".users.jsonl'");
  for (const auto& r : rep.per_user) {
    out << "{\"type\":\"user\",\"user\":" << ckg.train().user_ids()[r.user] << ",\"relevant\":" << r.relevant
        << ",\"recall\":" << format_double(r.recall) << ",\"ndcg\":" << format_double(r.ndcg) << "}\n";
  }
  out << "{\"type\":\"summary\",\"fold\":\"" << fold_name(rep.fold) << "\",\"k\":" << rep.k
      << ",\"users\":" << rep.user_count() << ",\"recall\":" << format_double(rep.recall)
      << ",\"ndcg\":" << format_double(rep.ndcg) << "}\n";
}

}  // namespace kgif
