#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/numeric.hpp"

namespace kgif {

enum class EmbedMode { transd, transr };

/// Which argument order the pairwise embedding loss uses.
///  conventional: -ln σ(g(h,r,t) - g(h,r,t'))   (positives pushed above negatives)
///  verbatim:     -ln σ(g(h,r,t') - g(h,r,t))
enum class LossOrder { conventional, verbatim };

enum class Role { head, tail };

struct EmbedConfig {
  std::size_t dim = 64;
  EmbedMode mode = EmbedMode::transd;
  LossOrder loss_order = LossOrder::conventional;
};

/// Initial CKG embedding tables. TransD keeps one projection vector per
/// entity (used in both roles) and one per relation; TransR keeps one d×d
/// matrix per relation, stacked in `relation_mat` as rows [r·d, (r+1)·d).
struct EmbedParams {
  EmbedMode mode = EmbedMode::transd;
  Matrix entity;
  Matrix entity_proj;
  Matrix relation;
  Matrix relation_proj;
  Matrix relation_mat;

  std::size_t dim() const { return entity.cols(); }
  std::size_t num_entities() const { return entity.rows(); }
  std::size_t num_relations() const { return relation.rows(); }

  std::vector<std::pair<std::string, Matrix*>> tensors() {
    std::vector<std::pair<std::string, Matrix*>> out{{"entity", &entity}, {"relation", &relation}};
    if (mode == EmbedMode::transd) {
      out.emplace_back("entity_proj", &entity_proj);
      out.emplace_back("relation_proj", &relation_proj);
    } else {
      out.emplace_back("relation_mat", &relation_mat);
    }
    return out;
  }

  EmbedParams zeros() const {
    EmbedParams g;
    g.mode = mode;
    g.entity = zeros_like(entity);
    g.entity_proj = zeros_like(entity_proj);
    g.relation = zeros_like(relation);
    g.relation_proj = zeros_like(relation_proj);
    g.relation_mat = zeros_like(relation_mat);
    return g;
  }

  std::span<const double> relation_block(RelationId r, std::size_t row) const {
    return relation_mat.row(r * dim() + row);
  }
};

inline EmbedParams init_embed_params(std::size_t num_entities, std::size_t num_relations, const EmbedConfig& cfg,
                                     std::uint64_t seed) {
  if (cfg.dim == 0) throw DimensionError("embedding dim must be positive");
  SplitMix seeds(seed);
  EmbedParams p;
  p.mode = cfg.mode;
  p.entity = xavier_init(num_entities, cfg.dim, seeds.next());
  p.relation = xavier_init(num_relations, cfg.dim, seeds.next());
  if (cfg.mode == EmbedMode::transd) {
    p.entity_proj = xavier_init(num_entities, cfg.dim, seeds.next());
    p.relation_proj = xavier_init(num_relations, cfg.dim, seeds.next());
  } else {
    // Each relation starts from the identity map.
    p.relation_mat = Matrix(num_relations * cfg.dim, cfg.dim);
    for (std::size_t r = 0; r < num_relations; ++r) {
      for (std::size_t k = 0; k < cfg.dim; ++k) p.relation_mat(r * cfg.dim + k, k) = 1.0;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Projection

/// Applies the relation-specific projection of `entity` to an arbitrary
/// vector v of the entity space:
///   TransD: (r_p e_pᵀ + I) v = v + r_p (e_p · v), never forming the matrix;
///   TransR: M_r v.
/// One projection vector per entity serves both roles, so `role` does not
/// change the result; it is kept so call sites read like the math.
inline void project_vector(const EmbedParams& p, EntityId entity, RelationId relation, Role /*role*/,
                           std::span<const double> v, std::span<double> out) {
  const std::size_t d = p.dim();
  if (entity >= p.num_entities() || relation >= p.num_relations()) {
    throw DimensionError("project: id out of range");
  }
  if (v.size() != d || out.size() != d) throw DimensionError("project: vector dim mismatch");
  if (p.mode == EmbedMode::transd) {
    const double s = dot(p.entity_proj.row(entity), v);
    auto rp = p.relation_proj.row(relation);
    for (std::size_t k = 0; k < d; ++k) out[k] = v[k] + rp[k] * s;
  } else {
    for (std::size_t k = 0; k < d; ++k) out[k] = dot(p.relation_block(relation, k), v);
  }
}

/// Backward of project_vector: accumulates into the projection parameters of
/// `grads` and adds the input gradient to `dv`.
inline void project_vector_backward(const EmbedParams& p, EntityId entity, RelationId relation,
                                    std::span<const double> v, std::span<const double> dout, EmbedParams& grads,
                                    std::span<double> dv) {
  const std::size_t d = p.dim();
  if (p.mode == EmbedMode::transd) {
    auto ep = p.entity_proj.row(entity);
    auto rp = p.relation_proj.row(relation);
    const double s = dot(ep, v);
    const double rp_dout = dot(rp, dout);
    for (std::size_t k = 0; k < d; ++k) dv[k] += dout[k] + ep[k] * rp_dout;
    axpy(rp_dout, v, grads.entity_proj.row(entity));
    axpy(s, dout, grads.relation_proj.row(relation));
  } else {
    for (std::size_t k = 0; k < d; ++k) {
      axpy(dout[k], p.relation_block(relation, k), dv);
      axpy(dout[k], v, grads.relation_mat.row(relation * d + k));
    }
  }
}

/// e_⊥: the entity's embedding projected into the relation space.
inline Vector project(const EmbedParams& p, EntityId entity, RelationId relation, Role role) {
  Vector out(p.dim());
  project_vector(p, entity, relation, role, p.entity.row(entity), out);
  return out;
}

inline void project_backward(const EmbedParams& p, EntityId entity, RelationId relation,
                             std::span<const double> dout, EmbedParams& grads) {
  project_vector_backward(p, entity, relation, p.entity.row(entity), dout, grads, grads.entity.row(entity));
}

// ---------------------------------------------------------------------------
// Scoring and loss

/// g(h, r, t) = -‖h_⊥ + r - t_⊥‖².
inline double score_triplet(const EmbedParams& p, EntityId h, RelationId r, EntityId t) {
  auto hp = project(p, h, r, Role::head);
  auto tp = project(p, t, r, Role::tail);
  auto rel = p.relation.row(r);
  double s = 0.0;
  for (std::size_t k = 0; k < hp.size(); ++k) {
    const double v = hp[k] + rel[k] - tp[k];
    s += v * v;
  }
  return -s;
}

/// Accumulates scale · ∂g(h,r,t)/∂θ into grads.
inline void score_triplet_backward(const EmbedParams& p, EntityId h, RelationId r, EntityId t, double scale,
                                   EmbedParams& grads) {
  auto hp = project(p, h, r, Role::head);
  auto tp = project(p, t, r, Role::tail);
  auto rel = p.relation.row(r);
  Vector dv(hp.size());
  for (std::size_t k = 0; k < hp.size(); ++k) dv[k] = -2.0 * (hp[k] + rel[k] - tp[k]) * scale;
  axpy(1.0, dv, grads.relation.row(r));
  project_backward(p, h, r, dv, grads);
  for (auto& x : dv) x = -x;
  project_backward(p, t, r, dv, grads);
}

struct EmbedSample {
  EntityId head;
  RelationId relation;
  EntityId tail;
  EntityId negative_tail;
};

inline double embed_margin(const EmbedParams& p, const EmbedSample& s, LossOrder order) {
  const double pos = score_triplet(p, s.head, s.relation, s.tail);
  const double neg = score_triplet(p, s.head, s.relation, s.negative_tail);
  return order == LossOrder::conventional ? pos - neg : neg - pos;
}

/// Mean over the batch of -ln σ(margin).
inline double embed_loss(const EmbedParams& p, std::span<const EmbedSample> batch,
                         LossOrder order = LossOrder::conventional) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : batch) total += neg_log_sigmoid(embed_margin(p, s, order));
  return total / static_cast<double>(batch.size());
}

/// Loss and its gradient, accumulated (scaled by `weight`) into grads.
inline double embed_loss_grad(const EmbedParams& p, std::span<const EmbedSample> batch, LossOrder order,
                              EmbedParams& grads, double weight = 1.0) {
  if (batch.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double sign = order == LossOrder::conventional ? 1.0 : -1.0;
  double total = 0.0;
  for (const auto& s : batch) {
    const double margin = embed_margin(p, s, order);
    total += neg_log_sigmoid(margin);
    // d/dm softplus(-m) = -σ(-m)
    const double dm = -sigmoid(-margin) * inv_n * weight;
    score_triplet_backward(p, s.head, s.relation, s.tail, sign * dm, grads);
    score_triplet_backward(p, s.head, s.relation, s.negative_tail, -sign * dm, grads);
  }
  return total * inv_n;
}

inline void apply_gradients(Optimizer& opt, EmbedParams& params, EmbedParams& grads) {
  auto ps = params.tensors();
  auto gs = grads.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) opt.step(ps[k].first, *ps[k].second, *gs[k].second);
}

/// One shuffled pass over every CKG triplet, each paired with a fresh
/// negative tail. Returns the sample-weighted mean loss.
inline double train_embed_epoch(EmbedParams& params, const CollaborativeKG& ckg, const EmbedConfig& cfg,
                                Optimizer& opt, std::size_t batch_size, Random& rng) {
  if (batch_size == 0) throw DataError("batch size must be positive");
  std::vector<std::size_t> order(ckg.num_triplets());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  double total = 0.0;
  std::vector<EmbedSample> batch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batch.clear();
    for (std::size_t k = start; k < end; ++k) {
      const auto& t = ckg.triplets()[order[k]];
      batch.push_back({t.head, t.relation, t.tail, sample_negative_tail(ckg, t.head, t.relation, rng)});
    }
    auto grads = params.zeros();
    const double loss = embed_loss_grad(params, batch, cfg.loss_order, grads);
    if (!std::isfinite(loss)) {
      throw NumericError("embedding loss became non-finite at batch starting " + std::to_string(start));
    }
    apply_gradients(opt, params, grads);
    total += loss * static_cast<double>(batch.size());
  }
  return order.empty() ? 0.0 : total / static_cast<double>(order.size());
}

}  // namespace kgif
