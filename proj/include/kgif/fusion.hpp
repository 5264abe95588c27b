#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/kg_embed.hpp"
#include "kgif/numeric.hpp"

namespace kgif {

enum class FusionType { multiplication, addition, concatenation, none };

/// How the layer-0 entity vector is formed from per-context fusion outputs.
///  mean:        the entity vector (mean over its contexts) feeds every layer;
///  per_triplet: first-layer messages use the tail's triplet-specific vector.
enum class FusionContext { mean, per_triplet };

struct FusionConfig {
  FusionType type = FusionType::multiplication;
  bool shared_weights = false;
  FusionContext context = FusionContext::mean;
};

inline std::size_t fused_input_dim(FusionType type, std::size_t dim) {
  return type == FusionType::concatenation ? 2 * dim : dim;
}

/// W1 transforms head-role inputs, W2 tail-role inputs. With shared weights
/// W2 is left empty and W1 serves both roles. The bias is a 1×n row.
struct FusionParams {
  bool shared = false;
  Matrix w1;
  Matrix w2;
  Matrix bias;

  const Matrix& weight(Role role) const { return (role == Role::tail && !shared) ? w2 : w1; }
  Matrix& weight(Role role) { return (role == Role::tail && !shared) ? w2 : w1; }

  std::vector<std::pair<std::string, Matrix*>> tensors() {
    std::vector<std::pair<std::string, Matrix*>> out{{"fusion.w1", &w1}};
    if (!shared) out.emplace_back("fusion.w2", &w2);
    out.emplace_back("fusion.bias", &bias);
    return out;
  }

  FusionParams zeros() const {
    FusionParams g;
    g.shared = shared;
    g.w1 = zeros_like(w1);
    g.w2 = zeros_like(w2);
    g.bias = zeros_like(bias);
    return g;
  }
};

inline FusionParams init_fusion_params(const FusionConfig& cfg, std::size_t dim, std::uint64_t seed) {
  SplitMix seeds(seed);
  FusionParams p;
  p.shared = cfg.shared_weights;
  const std::size_t in = fused_input_dim(cfg.type, dim);
  p.w1 = xavier_init(in, dim, seeds.next());
  const auto w2_seed = seeds.next();
  if (!cfg.shared_weights) p.w2 = xavier_init(in, dim, w2_seed);
  p.bias = Matrix(1, dim);
  return p;
}

// ---------------------------------------------------------------------------

/// Combines a projected entity vector with its relation embedding.
inline Vector fuse(std::span<const double> e_proj, std::span<const double> r, FusionType type) {
  if (e_proj.size() != r.size()) throw DimensionError("fuse: entity and relation dims differ");
  const std::size_t d = e_proj.size();
  switch (type) {
    case FusionType::multiplication: {
      Vector out(d);
      for (std::size_t k = 0; k < d; ++k) out[k] = e_proj[k] * r[k];
      return out;
    }
    case FusionType::addition: {
      Vector out(d);
      for (std::size_t k = 0; k < d; ++k) out[k] = e_proj[k] + r[k];
      return out;
    }
    case FusionType::concatenation: {
      Vector out(e_proj.begin(), e_proj.end());
      out.insert(out.end(), r.begin(), r.end());
      return out;
    }
    case FusionType::none: return Vector(e_proj.begin(), e_proj.end());
  }
  return {};
}

inline void fuse_backward(std::span<const double> e_proj, std::span<const double> r, FusionType type,
                          std::span<const double> dfused, std::span<double> de_proj, std::span<double> dr) {
  const std::size_t d = e_proj.size();
  switch (type) {
    case FusionType::multiplication:
      for (std::size_t k = 0; k < d; ++k) {
        de_proj[k] += dfused[k] * r[k];
        dr[k] += dfused[k] * e_proj[k];
      }
      break;
    case FusionType::addition:
      for (std::size_t k = 0; k < d; ++k) {
        de_proj[k] += dfused[k];
        dr[k] += dfused[k];
      }
      break;
    case FusionType::concatenation:
      for (std::size_t k = 0; k < d; ++k) {
        de_proj[k] += dfused[k];
        dr[k] += dfused[d + k];
      }
      break;
    case FusionType::none:
      for (std::size_t k = 0; k < d; ++k) de_proj[k] += dfused[k];
      break;
  }
}

/// ReLU(fused · W_role + b).
inline Vector reparameterize(std::span<const double> fused, const FusionParams& params, Role role) {
  const Matrix& w = params.weight(role);
  if (fused.size() != w.rows()) throw DimensionError("reparameterize: input dim mismatch");
  Vector out = vec_mat(fused, w);
  auto b = params.bias.row(0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = relu(out[k] + b[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Whole-graph fusion

/// One (entity, relation, role) occurrence in the graph. Fusion output only
/// depends on this key, so it is computed once per distinct context.
struct FusionContextKey {
  EntityId entity;
  RelationId relation;
  Role role;
  friend auto operator<=>(const FusionContextKey&, const FusionContextKey&) = default;
};

/// Distinct fusion contexts per entity plus, for every triplet, the index of
/// its head-role and tail-role context. Depends on graph structure only.
struct ContextLayout {
  std::vector<FusionContextKey> contexts;
  std::vector<std::size_t> entity_offsets;
  std::vector<std::size_t> head_context;
  std::vector<std::size_t> tail_context;

  std::size_t contexts_of(EntityId e) const { return entity_offsets[e + 1] - entity_offsets[e]; }
};

inline ContextLayout build_context_layout(const CollaborativeKG& ckg) {
  ContextLayout layout;
  const auto& trips = ckg.triplets();
  layout.contexts.reserve(trips.size() * 2);
  for (const auto& t : trips) {
    layout.contexts.push_back({t.head, t.relation, Role::head});
    layout.contexts.push_back({t.tail, t.relation, Role::tail});
  }
  std::sort(layout.contexts.begin(), layout.contexts.end());
  layout.contexts.erase(std::unique(layout.contexts.begin(), layout.contexts.end()), layout.contexts.end());
  layout.entity_offsets.assign(ckg.num_entities() + 1, 0);
  for (const auto& c : layout.contexts) ++layout.entity_offsets[c.entity + 1];
  for (std::size_t e = 0; e < ckg.num_entities(); ++e) layout.entity_offsets[e + 1] += layout.entity_offsets[e];
  auto index = [&](FusionContextKey key) {
    auto it = std::lower_bound(layout.contexts.begin(), layout.contexts.end(), key);
    return static_cast<std::size_t>(it - layout.contexts.begin());
  };
  layout.head_context.reserve(trips.size());
  layout.tail_context.reserve(trips.size());
  for (const auto& t : trips) {
    layout.head_context.push_back(index({t.head, t.relation, Role::head}));
    layout.tail_context.push_back(index({t.tail, t.relation, Role::tail}));
  }
  return layout;
}

/// Layer-0 representations. `context` holds h*/t* per distinct context;
/// `entity` is their per-entity mean (raw embedding for isolated entities).
/// The remaining tables cache forward intermediates for the backward pass.
struct FusedEmbeddings {
  Matrix entity;
  Matrix context;
  Matrix projected;
  Matrix fused;
  Matrix preactivation;
};

inline FusedEmbeddings fuse_all(const CollaborativeKG& ckg, const ContextLayout& layout, const EmbedParams& embed,
                                const FusionParams& fusion, const FusionConfig& cfg) {
  const std::size_t d = embed.dim();
  const std::size_t n_ctx = layout.contexts.size();
  const std::size_t d_in = fused_input_dim(cfg.type, d);
  FusedEmbeddings out;
  out.entity = Matrix(ckg.num_entities(), d);
  out.context = Matrix(n_ctx, d);
  out.projected = Matrix(n_ctx, d);
  out.fused = Matrix(n_ctx, d_in);
  out.preactivation = Matrix(n_ctx, d);
  auto bias = fusion.bias.row(0);
  for (std::size_t c = 0; c < n_ctx; ++c) {
    const auto& key = layout.contexts[c];
    project_vector(embed, key.entity, key.relation, key.role, embed.entity.row(key.entity), out.projected.row(c));
    auto f = fuse(out.projected.row(c), embed.relation.row(key.relation), cfg.type);
    std::copy(f.begin(), f.end(), out.fused.row(c).begin());
    auto z = out.preactivation.row(c);
    vec_mat(f, fusion.weight(key.role), z);
    auto a = out.context.row(c);
    for (std::size_t k = 0; k < d; ++k) {
      z[k] += bias[k];
      a[k] = relu(z[k]);
    }
  }
  for (EntityId e = 0; e < ckg.num_entities(); ++e) {
    const std::size_t n = layout.contexts_of(e);
    auto row = out.entity.row(e);
    if (n == 0) {
      auto raw = embed.entity.row(e);
      std::copy(raw.begin(), raw.end(), row.begin());
      continue;
    }
    for (std::size_t c = layout.entity_offsets[e]; c < layout.entity_offsets[e + 1]; ++c) {
      axpy(1.0, out.context.row(c), row);
    }
    for (auto& v : row) v /= static_cast<double>(n);
  }
  return out;
}

/// Backward of fuse_all. `d_entity` is the gradient w.r.t. the per-entity
/// table, `d_context` (optional, may be empty) w.r.t. the per-context table.
inline void fuse_all_backward(const CollaborativeKG& ckg, const ContextLayout& layout, const EmbedParams& embed,
                              const FusionParams& fusion, const FusionConfig& cfg, const FusedEmbeddings& fwd,
                              const Matrix& d_entity, const Matrix& d_context, EmbedParams& g_embed,
                              FusionParams& g_fusion) {
  const std::size_t d = embed.dim();
  const std::size_t d_in = fused_input_dim(cfg.type, d);
  Vector dz(d), df(d_in), dp(d);
  auto g_bias = g_fusion.bias.row(0);
  for (EntityId e = 0; e < ckg.num_entities(); ++e) {
    const std::size_t n = layout.contexts_of(e);
    if (n == 0) {
      axpy(1.0, d_entity.row(e), g_embed.entity.row(e));
      continue;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = layout.entity_offsets[e]; c < layout.entity_offsets[e + 1]; ++c) {
      const auto& key = layout.contexts[c];
      auto z = fwd.preactivation.row(c);
      auto de = d_entity.row(e);
      for (std::size_t k = 0; k < d; ++k) {
        double da = de[k] * inv_n;
        if (!d_context.empty()) da += d_context(c, k);
        dz[k] = z[k] > 0 ? da : 0.0;
      }
      axpy(1.0, dz, g_bias);
      vec_mat_backward_weight(fwd.fused.row(c), dz, g_fusion.weight(key.role));
      std::fill(df.begin(), df.end(), 0.0);
      vec_mat_backward_input(dz, fusion.weight(key.role), df);
      std::fill(dp.begin(), dp.end(), 0.0);
      fuse_backward(fwd.projected.row(c), embed.relation.row(key.relation), cfg.type, df, dp,
                    g_embed.relation.row(key.relation));
      project_vector_backward(embed, key.entity, key.relation, embed.entity.row(key.entity), dp, g_embed,
                              g_embed.entity.row(key.entity));
    }
  }
}

}  // namespace kgif
