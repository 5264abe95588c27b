#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/fusion.hpp"
#include "kgif/kg_embed.hpp"
#include "kgif/numeric.hpp"

namespace kgif {

// ---------------------------------------------------------------------------
// Attention

/// Unnormalized attention of one triplet:
///   δ = (M_r^t t*)ᵀ tanh(M_r^h h* + r)
/// with the projections applied through the embedding's projection vectors.
inline double attention_score(const EmbedParams& embed, EntityId h, RelationId r, EntityId t,
                              std::span<const double> h_star, std::span<const double> t_star) {
  const std::size_t d = embed.dim();
  if (h_star.size() != d || t_star.size() != d) throw DimensionError("attention_score: dim mismatch");
  Vector hp(d), tp(d);
  project_vector(embed, h, r, Role::head, h_star, hp);
  project_vector(embed, t, r, Role::tail, t_star, tp);
  auto rel = embed.relation.row(r);
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += tp[k] * std::tanh(hp[k] + rel[k]);
  return s;
}

/// Softmax with max subtraction. Empty input gives empty output.
inline Vector normalize_ego(std::span<const double> scores) {
  Vector w(scores.begin(), scores.end());
  if (w.empty()) return w;
  const double mx = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  for (auto& v : w) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

/// Normalized attention per triplet, aligned with `CollaborativeKG::triplets()`;
/// the weights of one ego-network are the contiguous run `edges_of(h)`.
struct AttentionIndex {
  std::vector<double> weights;

  std::span<const double> of(const CollaborativeKG& ckg, EntityId h) const {
    return {weights.data() + ckg.edge_offset(h), ckg.edges_of(h).size()};
  }
  double at(const CollaborativeKG& ckg, EntityId h, RelationId r, EntityId t) const {
    const auto k = ckg.find(h, r, t);
    if (k == ckg.num_triplets()) throw DataError("attention lookup for a triplet not in the graph");
    return weights[k];
  }
};

/// Scores every triplet from the per-context fused vectors and softmaxes each
/// ego-network.
inline AttentionIndex compute_attention(const CollaborativeKG& ckg, const ContextLayout& layout,
                                        const EmbedParams& embed, const FusedEmbeddings& fused) {
  AttentionIndex index;
  const auto& trips = ckg.triplets();
  Vector scores(trips.size());
  for (std::size_t k = 0; k < trips.size(); ++k) {
    const auto& t = trips[k];
    scores[k] = attention_score(embed, t.head, t.relation, t.tail, fused.context.row(layout.head_context[k]),
                                fused.context.row(layout.tail_context[k]));
  }
  index.weights.resize(trips.size());
  for (EntityId h = 0; h < ckg.num_entities(); ++h) {
    const std::size_t off = ckg.edge_offset(h), n = ckg.edges_of(h).size();
    auto w = normalize_ego(std::span<const double>(scores.data() + off, n));
    std::copy(w.begin(), w.end(), index.weights.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return index;
}

// ---------------------------------------------------------------------------
// Aggregators

enum class Aggregator { bi_interaction, gcn, graphsage };

/// h_Ego = Σ δ̂ · t over the ego-network. Zero vector for an empty network.
inline Vector aggregate_ego(std::span<const double> weights, const std::vector<std::span<const double>>& tails,
                            std::size_t dim) {
  if (weights.size() != tails.size()) throw DimensionError("aggregate_ego: weights/tails length mismatch");
  Vector out(dim, 0.0);
  for (std::size_t k = 0; k < tails.size(); ++k) axpy(weights[k], tails[k], out);
  return out;
}

/// LeakyReLU((h + h_ego)·W1) + LeakyReLU((h ⊙ h_ego)·W2).
inline Vector bi_interaction(std::span<const double> h, std::span<const double> h_ego, const Matrix& w1,
                             const Matrix& w2) {
  if (h.size() != h_ego.size()) throw DimensionError("bi_interaction: dim mismatch");
  Vector sum(h.size()), prod(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    sum[k] = h[k] + h_ego[k];
    prod[k] = h[k] * h_ego[k];
  }
  auto a = leaky_relu(vec_mat(sum, w1));
  auto b = leaky_relu(vec_mat(prod, w2));
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

/// LeakyReLU((h + h_ego)·W).
inline Vector gcn_aggregate(std::span<const double> h, std::span<const double> h_ego, const Matrix& w) {
  if (h.size() != h_ego.size()) throw DimensionError("gcn_aggregate: dim mismatch");
  Vector sum(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) sum[k] = h[k] + h_ego[k];
  return leaky_relu(vec_mat(sum, w));
}

/// LeakyReLU([h ‖ h_ego]·W), W of shape 2d_in × d_out.
inline Vector graphsage_aggregate(std::span<const double> h, std::span<const double> h_ego, const Matrix& w) {
  if (h.size() != h_ego.size()) throw DimensionError("graphsage_aggregate: dim mismatch");
  Vector cat(h.begin(), h.end());
  cat.insert(cat.end(), h_ego.begin(), h_ego.end());
  return leaky_relu(vec_mat(cat, w));
}

// ---------------------------------------------------------------------------
// Layer stack

struct LayerStack {
  std::vector<std::size_t> dims{64, 32, 16, 8};
  Aggregator aggregator = Aggregator::bi_interaction;
  double dropout = 0.1;

  std::size_t num_layers() const { return dims.size(); }

  void validate() const {
    if (dims.empty()) throw ConfigError("layer stack needs at least one layer");
    for (auto d : dims) {
      if (d == 0) throw ConfigError("layer dims must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  }
};

/// Per-layer aggregator weights; `w2` is only used by bi-interaction.
struct LayerWeights {
  Matrix w1;
  Matrix w2;
};

inline std::vector<LayerWeights> init_layer_weights(const LayerStack& stack, std::size_t input_dim,
                                                    std::uint64_t seed) {
  stack.validate();
  SplitMix seeds(seed);
  std::vector<LayerWeights> out;
  std::size_t in = input_dim;
  for (auto d : stack.dims) {
    LayerWeights w;
    const std::size_t rows = stack.aggregator == Aggregator::graphsage ? 2 * in : in;
    w.w1 = xavier_init(rows, d, seeds.next());
    const auto s2 = seeds.next();
    if (stack.aggregator == Aggregator::bi_interaction) w.w2 = xavier_init(in, d, s2);
    out.push_back(std::move(w));
    in = d;
  }
  return out;
}

/// Output of a forward pass through the stack. `tables[0]` is the layer-0
/// input, `tables[l]` the layer-l output. The other members are cached for
/// the backward pass.
struct PropagationResult {
  std::vector<Matrix> tables;
  std::vector<Matrix> ego;    // ego[l-1]: aggregated neighbourhood feeding layer l
  std::vector<Matrix> pre1;   // pre-activation of the first transform
  std::vector<Matrix> pre2;   // pre-activation of the product transform (bi-interaction)
  std::vector<Vector> masks;  // per-edge dropout multipliers; empty when dropout is off
};

namespace detail {

inline std::span<const double> message_source(const PropagationResult& res, const FusedEmbeddings& fused,
                                              const ContextLayout& layout, FusionContext mode, std::size_t layer,
                                              std::size_t edge, EntityId tail) {
  if (layer == 1 && mode == FusionContext::per_triplet) return fused.context.row(layout.tail_context[edge]);
  return res.tables[layer - 1].row(tail);
}

}  // namespace detail

/// Stacked attentive propagation. With `training` set and dropout > 0, every
/// incoming message is dropped independently and survivors are rescaled by
/// 1/(1-p).
inline PropagationResult propagate(const CollaborativeKG& ckg, const ContextLayout& layout,
                                   const FusedEmbeddings& fused, const AttentionIndex& attention,
                                   const LayerStack& stack, const std::vector<LayerWeights>& weights,
                                   FusionContext mode, bool training, Random* rng) {
  if (weights.size() != stack.num_layers()) throw DimensionError("propagate: weight count != layer count");
  if (attention.weights.size() != ckg.num_triplets()) throw DimensionError("propagate: attention size mismatch");
  const bool drop = training && stack.dropout > 0.0;
  if (drop && rng == nullptr) throw DataError("propagate: dropout needs a random source");
  const std::size_t n = ckg.num_entities();
  const auto& trips = ckg.triplets();
  PropagationResult res;
  res.tables.push_back(fused.entity);
  std::size_t in = fused.entity.cols();
  for (std::size_t l = 1; l <= stack.num_layers(); ++l) {
    const std::size_t out_dim = stack.dims[l - 1];
    const auto& w = weights[l - 1];
    Vector mask;
    if (drop) {
      mask.resize(trips.size());
      const double keep_scale = 1.0 / (1.0 - stack.dropout);
      for (auto& m : mask) m = rng->uniform() < stack.dropout ? 0.0 : keep_scale;
    }
    Matrix ego(n, in), pre1(n, out_dim), pre2, out(n, out_dim);
    if (stack.aggregator == Aggregator::bi_interaction) pre2 = Matrix(n, out_dim);
    const Matrix& prev = res.tables[l - 1];
    Vector s(in), q(in), cat;
    Vector z2(out_dim);
    for (EntityId h = 0; h < n; ++h) {
      auto e = ego.row(h);
      const std::size_t off = ckg.edge_offset(h);
      const auto edges = ckg.edges_of(h);
      for (std::size_t j = 0; j < edges.size(); ++j) {
        const std::size_t k = off + j;
        double coef = attention.weights[k];
        if (drop) coef *= mask[k];
        if (coef == 0.0) continue;
        axpy(coef, detail::message_source(res, fused, layout, mode, l, k, edges[j].tail), e);
      }
      auto x = prev.row(h);
      auto z1 = pre1.row(h);
      auto o = out.row(h);
      switch (stack.aggregator) {
        case Aggregator::bi_interaction:
          for (std::size_t c = 0; c < in; ++c) {
            s[c] = x[c] + e[c];
            q[c] = x[c] * e[c];
          }
          vec_mat(s, w.w1, z1);
          vec_mat(q, w.w2, pre2.row(h));
          for (std::size_t c = 0; c < out_dim; ++c) o[c] = leaky_relu(z1[c]) + leaky_relu(pre2(h, c));
          break;
        case Aggregator::gcn:
          for (std::size_t c = 0; c < in; ++c) s[c] = x[c] + e[c];
          vec_mat(s, w.w1, z1);
          for (std::size_t c = 0; c < out_dim; ++c) o[c] = leaky_relu(z1[c]);
          break;
        case Aggregator::graphsage:
          cat.assign(x.begin(), x.end());
          cat.insert(cat.end(), e.begin(), e.end());
          vec_mat(cat, w.w1, z1);
          for (std::size_t c = 0; c < out_dim; ++c) o[c] = leaky_relu(z1[c]);
          break;
      }
    }
    res.ego.push_back(std::move(ego));
    res.pre1.push_back(std::move(pre1));
    res.pre2.push_back(std::move(pre2));
    res.masks.push_back(std::move(mask));
    res.tables.push_back(std::move(out));
    in = out_dim;
  }
  return res;
}

/// Backward of propagate. `d_tables[l]` holds the loss gradient w.r.t.
/// `tables[l]` coming from outside the stack (layer concatenation); it is
/// consumed in place. On return `d_tables[0]` is the full gradient w.r.t. the
/// layer-0 entity table and `d_context` (sized here in per-triplet mode) the
/// gradient w.r.t. the per-context fused vectors.
inline void propagate_backward(const CollaborativeKG& ckg, const ContextLayout& layout,
                               const FusedEmbeddings& fused, const AttentionIndex& attention,
                               const LayerStack& stack, const std::vector<LayerWeights>& weights,
                               FusionContext mode, const PropagationResult& res, std::vector<Matrix>& d_tables,
                               std::vector<LayerWeights>& g_weights, Matrix& d_context) {
  const std::size_t n = ckg.num_entities();
  if (mode == FusionContext::per_triplet) d_context = Matrix(layout.contexts.size(), fused.context.cols());
  for (std::size_t l = stack.num_layers(); l >= 1; --l) {
    const auto& w = weights[l - 1];
    auto& gw = g_weights[l - 1];
    const Matrix& prev = res.tables[l - 1];
    const Matrix& ego = res.ego[l - 1];
    const Matrix& pre1 = res.pre1[l - 1];
    const Matrix& pre2 = res.pre2[l - 1];
    const Vector& mask = res.masks[l - 1];
    const std::size_t in = prev.cols(), out_dim = stack.dims[l - 1];
    Matrix& g_out = d_tables[l];
    Matrix& g_prev = d_tables[l - 1];
    Vector dz1(out_dim), dz2(out_dim), dx(in), dego(in), tmp, s(in), q(in), cat;
    for (EntityId h = 0; h < n; ++h) {
      auto go = g_out.row(h);
      auto x = prev.row(h);
      auto e = ego.row(h);
      std::fill(dx.begin(), dx.end(), 0.0);
      std::fill(dego.begin(), dego.end(), 0.0);
      for (std::size_t c = 0; c < out_dim; ++c) dz1[c] = go[c] * leaky_relu_grad(pre1(h, c));
      switch (stack.aggregator) {
        case Aggregator::bi_interaction: {
          for (std::size_t c = 0; c < in; ++c) {
            s[c] = x[c] + e[c];
            q[c] = x[c] * e[c];
          }
          vec_mat_backward_weight(s, dz1, gw.w1);
          tmp.assign(in, 0.0);
          vec_mat_backward_input(dz1, w.w1, tmp);
          for (std::size_t c = 0; c < in; ++c) {
            dx[c] += tmp[c];
            dego[c] += tmp[c];
          }
          for (std::size_t c = 0; c < out_dim; ++c) dz2[c] = go[c] * leaky_relu_grad(pre2(h, c));
          vec_mat_backward_weight(q, dz2, gw.w2);
          tmp.assign(in, 0.0);
          vec_mat_backward_input(dz2, w.w2, tmp);
          for (std::size_t c = 0; c < in; ++c) {
            dx[c] += tmp[c] * e[c];
            dego[c] += tmp[c] * x[c];
          }
          break;
        }
        case Aggregator::gcn: {
          for (std::size_t c = 0; c < in; ++c) s[c] = x[c] + e[c];
          vec_mat_backward_weight(s, dz1, gw.w1);
          tmp.assign(in, 0.0);
          vec_mat_backward_input(dz1, w.w1, tmp);
          for (std::size_t c = 0; c < in; ++c) {
            dx[c] += tmp[c];
            dego[c] += tmp[c];
          }
          break;
        }
        case Aggregator::graphsage: {
          cat.assign(x.begin(), x.end());
          cat.insert(cat.end(), e.begin(), e.end());
          vec_mat_backward_weight(cat, dz1, gw.w1);
          tmp.assign(2 * in, 0.0);
          vec_mat_backward_input(dz1, w.w1, tmp);
          for (std::size_t c = 0; c < in; ++c) {
            dx[c] += tmp[c];
            dego[c] += tmp[in + c];
          }
          break;
        }
      }
      axpy(1.0, dx, g_prev.row(h));
      const std::size_t off = ckg.edge_offset(h);
      const auto edges = ckg.edges_of(h);
      for (std::size_t j = 0; j < edges.size(); ++j) {
        const std::size_t k = off + j;
        double coef = attention.weights[k];
        if (!mask.empty()) coef *= mask[k];
        if (coef == 0.0) continue;
        if (l == 1 && mode == FusionContext::per_triplet) {
          axpy(coef, dego, d_context.row(layout.tail_context[k]));
        } else {
          axpy(coef, dego, g_prev.row(edges[j].tail));
        }
      }
    }
  }
}

}  // namespace kgif
