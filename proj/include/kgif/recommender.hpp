#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgif/ckg_data.hpp"
#include "kgif/error.hpp"
#include "kgif/eval.hpp"
#include "kgif/fusion.hpp"
#include "kgif/kg_embed.hpp"
#include "kgif/numeric.hpp"
#include "kgif/propagation.hpp"

namespace kgif {

struct ModelConfig {
  EmbedConfig embed;
  FusionConfig fusion;
  LayerStack stack;

  /// Σ d_l including the layer-0 input: 64+64+32+16+8 = 184 by default.
  std::size_t representation_dim() const {
    std::size_t d = embed.dim;
    for (auto l : stack.dims) d += l;
    return d;
  }
};

/// Every trainable tensor of the model.
struct ModelParams {
  EmbedParams embed;
  FusionParams fusion;
  std::vector<LayerWeights> layers;

  /// Named tensors in a fixed declaration order (also the checkpoint order).
  std::vector<std::pair<std::string, Matrix*>> tensors() {
    auto out = embed.tensors();
    for (auto& t : fusion.tensors()) out.push_back(t);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l + 1);
      out.emplace_back(prefix + ".w1", &layers[l].w1);
      if (!layers[l].w2.empty()) out.emplace_back(prefix + ".w2", &layers[l].w2);
    }
    return out;
  }

  std::vector<std::pair<std::string, const Matrix*>> tensors() const {
    auto mut = const_cast<ModelParams*>(this)->tensors();
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [n, m] : mut) out.emplace_back(n, m);
    return out;
  }

  ModelParams zeros() const {
    ModelParams g;
    g.embed = embed.zeros();
    g.fusion = fusion.zeros();
    for (const auto& l : layers) g.layers.push_back({zeros_like(l.w1), zeros_like(l.w2)});
    return g;
  }

  bool all_finite() const {
    for (const auto& [name, m] : tensors()) {
      if (!kgif::all_finite(m->flat())) return false;
    }
    return true;
  }
};

inline ModelParams init_model_params(const CollaborativeKG& ckg, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.stack.validate();
  SplitMix seeds(seed);
  ModelParams p;
  p.embed = init_embed_params(ckg.num_entities(), ckg.num_relations(), cfg.embed, seeds.next());
  p.fusion = init_fusion_params(cfg.fusion, cfg.embed.dim, seeds.next());
  p.layers = init_layer_weights(cfg.stack, cfg.embed.dim, seeds.next());
  return p;
}

// ---------------------------------------------------------------------------
// Representations and losses

/// Concatenates layer tables (layer order) for users and items.
inline FinalRepresentations final_reps(const std::vector<Matrix>& tables, const CollaborativeKG& ckg) {
  if (tables.empty()) throw DimensionError("final_reps: no layer tables");
  std::size_t dim = 0;
  for (const auto& t : tables) {
    if (t.rows() != ckg.num_entities()) throw DimensionError("final_reps: layer table row count mismatch");
    dim += t.cols();
  }
  FinalRepresentations reps;
  reps.users = Matrix(ckg.num_users(), dim);
  reps.items = Matrix(ckg.num_items(), dim);
  auto copy_row = [&](EntityId e, std::span<double> out) {
    std::size_t off = 0;
    for (const auto& t : tables) {
      auto r = t.row(e);
      std::copy(r.begin(), r.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
      off += r.size();
    }
  };
  for (std::uint32_t u = 0; u < ckg.num_users(); ++u) copy_row(ckg.user_entity(u), reps.users.row(u));
  for (std::uint32_t i = 0; i < ckg.num_items(); ++i) copy_row(ckg.item_entity(i), reps.items.row(i));
  return reps;
}

/// Mean of -ln σ(ŷ(u,i) - ŷ(u,j)) over the batch.
inline double bpr_loss(std::span<const BprTriple> batch, const FinalRepresentations& reps) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& b : batch) {
    auto u = reps.users.row(b.user);
    total += neg_log_sigmoid(predict(u, reps.items.row(b.positive)) - predict(u, reps.items.row(b.negative)));
  }
  return total / static_cast<double>(batch.size());
}

/// λ‖Θ‖²: user rows of the entity tables weighted by lambda_user, everything
/// else by lambda_item.
inline double l2_penalty(const ModelParams& params, std::size_t num_users, double lambda_user, double lambda_item) {
  double total = 0.0;
  for (const auto& [name, m] : params.tensors()) {
    const bool per_entity = name == "entity" || name == "entity_proj";
    for (std::size_t r = 0; r < m->rows(); ++r) {
      const double lambda = (per_entity && r < num_users) ? lambda_user : lambda_item;
      total += lambda * squared_norm(m->row(r));
    }
  }
  return total;
}

inline void l2_grad(const ModelParams& params, std::size_t num_users, double lambda_user, double lambda_item,
                    ModelParams& grads) {
  auto ps = params.tensors();
  auto gs = grads.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const bool per_entity = ps[k].first == "entity" || ps[k].first == "entity_proj";
    const Matrix& m = *ps[k].second;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double lambda = (per_entity && r < num_users) ? lambda_user : lambda_item;
      axpy(2.0 * lambda, m.row(r), gs[k].second->row(r));
    }
  }
}

/// ℒ = ℒ_Embed + ℒ_Pred + λ‖Θ‖².
inline double total_objective(double embed_component, double pred_component, double l2_component) {
  return embed_component + pred_component + l2_component;
}

struct ForwardPass {
  FusedEmbeddings fused;
  PropagationResult propagation;
  FinalRepresentations reps;
};

/// A model bound to a graph. Holds the context layout derived from the graph
/// and exposes forward/backward over the whole pipeline.
class Recommender {
public:
  Recommender(const CollaborativeKG& ckg, ModelConfig cfg, ModelParams params)
      : ckg_(&ckg), cfg_(std::move(cfg)), params_(std::move(params)), layout_(build_context_layout(ckg)) {
    if (params_.embed.num_entities() != ckg.num_entities() || params_.embed.num_relations() != ckg.num_relations()) {
      throw DimensionError("model tables sized for " + std::to_string(params_.embed.num_entities()) +
                           " entities / " + std::to_string(params_.embed.num_relations()) +
                           " relations, graph has " + std::to_string(ckg.num_entities()) + " / " +
                           std::to_string(ckg.num_relations()));
    }
  }

  const CollaborativeKG& graph() const { return *ckg_; }
  const ModelConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const ContextLayout& layout() const { return layout_; }

  FusedEmbeddings fuse() const { return fuse_all(*ckg_, layout_, params_.embed, params_.fusion, cfg_.fusion); }

  AttentionIndex attention() const { return compute_attention(*ckg_, layout_, params_.embed, fuse()); }

  ForwardPass forward(const AttentionIndex& attention, bool training, Random* rng) const {
    ForwardPass f;
    f.fused = fuse();
    f.propagation = propagate(*ckg_, layout_, f.fused, attention, cfg_.stack, params_.layers, cfg_.fusion.context,
                              training, rng);
    f.reps = final_reps(f.propagation.tables, *ckg_);
    return f;
  }

  /// Evaluation-mode representations with attention refreshed from the
  /// current parameters.
  FinalRepresentations representations() const { return forward(attention(), false, nullptr).reps; }

  /// BPR loss of the batch; its gradient is accumulated into `grads`.
  double bpr_loss_grad(std::span<const BprTriple> batch, const AttentionIndex& attention, bool training, Random* rng,
                       ModelParams& grads, double weight = 1.0) const {
    if (batch.empty()) return 0.0;
    auto f = forward(attention, training, rng);
    const auto& reps = f.reps;
    Matrix d_users(reps.users.rows(), reps.users.cols()), d_items(reps.items.rows(), reps.items.cols());
    const double inv_n = weight / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& b : batch) {
      auto u = reps.users.row(b.user);
      auto pi = reps.items.row(b.positive);
      auto nj = reps.items.row(b.negative);
      const double diff = predict(u, pi) - predict(u, nj);
      total += neg_log_sigmoid(diff);
      const double g = -sigmoid(-diff) * inv_n;
      auto du = d_users.row(b.user);
      for (std::size_t k = 0; k < u.size(); ++k) du[k] += g * (pi[k] - nj[k]);
      axpy(g, u, d_items.row(b.positive));
      axpy(-g, u, d_items.row(b.negative));
    }
    backward_from_reps(f, attention, d_users, d_items, grads);
    return total / static_cast<double>(batch.size());
  }

  /// Pushes gradients w.r.t. final representations back to every parameter.
  void backward_from_reps(const ForwardPass& f, const AttentionIndex& attention, const Matrix& d_users,
                          const Matrix& d_items, ModelParams& grads) const {
    std::vector<Matrix> d_tables;
    for (const auto& t : f.propagation.tables) d_tables.emplace_back(t.rows(), t.cols());
    auto scatter = [&](EntityId e, std::span<const double> g) {
      std::size_t off = 0;
      for (auto& t : d_tables) {
        axpy(1.0, g.subspan(off, t.cols()), t.row(e));
        off += t.cols();
      }
    };
    for (std::uint32_t u = 0; u < ckg_->num_users(); ++u) scatter(ckg_->user_entity(u), d_users.row(u));
    for (std::uint32_t i = 0; i < ckg_->num_items(); ++i) scatter(ckg_->item_entity(i), d_items.row(i));
    Matrix d_context;
    propagate_backward(*ckg_, layout_, f.fused, attention, cfg_.stack, params_.layers, cfg_.fusion.context,
                       f.propagation, d_tables, grads.layers, d_context);
    fuse_all_backward(*ckg_, layout_, params_.embed, params_.fusion, cfg_.fusion, f.fused, d_tables[0], d_context,
                      grads.embed, grads.fusion);
  }

  double embed_loss_grad(std::span<const EmbedSample> batch, ModelParams& grads) const {
    return kgif::embed_loss_grad(params_.embed, batch, cfg_.embed.loss_order, grads.embed);
  }

private:
  const CollaborativeKG* ckg_;
  ModelConfig cfg_;
  ModelParams params_;
  ContextLayout layout_;
};

/// The full objective on fixed batches with a fixed attention index and no
/// dropout. Used for gradient checking and loss reporting.
struct ObjectiveTerms {
  double embed = 0.0;
  double pred = 0.0;
  double l2 = 0.0;
  double total() const { return total_objective(embed, pred, l2); }
};

inline ObjectiveTerms objective(const Recommender& model, std::span<const EmbedSample> embed_batch,
                                std::span<const BprTriple> bpr_batch, const AttentionIndex& attention,
                                double lambda_user, double lambda_item) {
  ObjectiveTerms t;
  t.embed = embed_loss(model.params().embed, embed_batch, model.config().embed.loss_order);
  if (!bpr_batch.empty()) t.pred = bpr_loss(bpr_batch, model.forward(attention, false, nullptr).reps);
  t.l2 = l2_penalty(model.params(), model.graph().num_users(), lambda_user, lambda_item);
  return t;
}

inline ObjectiveTerms objective_grad(const Recommender& model, std::span<const EmbedSample> embed_batch,
                                     std::span<const BprTriple> bpr_batch, const AttentionIndex& attention,
                                     double lambda_user, double lambda_item, ModelParams& grads) {
  ObjectiveTerms t;
  t.embed = model.embed_loss_grad(embed_batch, grads);
  t.pred = model.bpr_loss_grad(bpr_batch, attention, false, nullptr, grads);
  t.l2 = l2_penalty(model.params(), model.graph().num_users(), lambda_user, lambda_item);
  l2_grad(model.params(), model.graph().num_users(), lambda_user, lambda_item, grads);
  return t;
}

inline void apply_gradients(Optimizer& opt, ModelParams& params, ModelParams& grads) {
  auto ps = params.tensors();
  auto gs = grads.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) opt.step(ps[k].first, *ps[k].second, *gs[k].second);
}

// ---------------------------------------------------------------------------
// Training

enum class TrainMode { alternating, joint };

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;
  double lambda_user = 1e-5;
  double lambda_item = 1e-5;
  std::size_t patience = 50;
  std::size_t max_epochs = 1000;
  std::size_t k = 20;
  std::uint64_t seed = 2024;
  TrainMode mode = TrainMode::alternating;
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double embed_loss = 0.0;
  double pred_loss = 0.0;
  double valid_recall = 0.0;
  double valid_ndcg = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_recall = -1.0;
  double best_ndcg = 0.0;
  std::size_t epochs_run = 0;
};

/// Raised when a loss or parameter turns non-finite; carries the best state
/// reached before that point.
class TrainingDiverged : public NumericError {
public:
  TrainingDiverged(const std::string& what, TrainResult last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return last_good_; }

private:
  TrainResult last_good_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;
using AttentionCallback = std::function<void(std::size_t epoch, const AttentionIndex&)>;

inline std::vector<BprTriple> sample_bpr_batch(const CollaborativeKG& ckg, std::size_t n, Random& rng) {
  std::vector<BprTriple> batch;
  batch.reserve(n);
  for (std::size_t k = 0; k < n; ++k) batch.push_back(sample_bpr_triple(ckg, rng));
  return batch;
}

/// Alternating (default) or joint optimisation with early stopping on
/// validation Recall@k. Epoch numbers continue from `start_epoch`.
inline TrainResult train(const CollaborativeKG& ckg, const ModelConfig& cfg, const TrainConfig& tc,
                         std::optional<ModelParams> initial = std::nullopt, std::size_t start_epoch = 0,
                         const EpochCallback& on_epoch = {}, const AttentionCallback& on_attention = {}) {
  if (!(tc.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (tc.patience == 0) throw ConfigError("patience must be at least 1");
  if (tc.batch_size == 0) throw ConfigError("batch size must be positive");
  if (ckg.train().empty()) throw DataError("train: empty training split");
  Random rng(tc.seed);
  SplitMix seeds(tc.seed);
  ModelParams params = initial ? std::move(*initial) : init_model_params(ckg, cfg, seeds.next());
  Recommender model(ckg, cfg, std::move(params));
  Optimizer opt(AdamConfig{tc.learning_rate});
  const bool monitor = !ckg.validation().empty();
  const std::size_t pred_batches = (ckg.train().size() + tc.batch_size - 1) / tc.batch_size;

  TrainResult result;
  result.params = model.params();
  std::size_t since_best = 0;
  auto diverged = [&](const std::string& what) {
    result.epochs_run = start_epoch + result.history.size();
    throw TrainingDiverged(what, result);
  };

  for (std::size_t e = 1; e <= tc.max_epochs; ++e) {
    EpochRecord rec;
    rec.epoch = start_epoch + e;
    if (tc.mode == TrainMode::alternating) {
      rec.embed_loss = train_embed_epoch(model.params().embed, ckg, cfg.embed, opt, tc.batch_size, rng);
      const auto attention = model.attention();
      if (on_attention) on_attention(rec.epoch, attention);
      double pred_total = 0.0;
      for (std::size_t b = 0; b < pred_batches; ++b) {
        auto batch = sample_bpr_batch(ckg, tc.batch_size, rng);
        auto grads = model.params().zeros();
        pred_total += model.bpr_loss_grad(batch, attention, true, &rng, grads);
        l2_grad(model.params(), ckg.num_users(), tc.lambda_user, tc.lambda_item, grads);
        apply_gradients(opt, model.params(), grads);
      }
      rec.pred_loss = pred_total / static_cast<double>(pred_batches);
    } else {
      const auto attention = model.attention();
      if (on_attention) on_attention(rec.epoch, attention);
      std::vector<std::size_t> order(ckg.num_triplets());
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(order);
      std::size_t cursor = 0;
      double embed_total = 0.0, pred_total = 0.0;
      for (std::size_t b = 0; b < pred_batches; ++b) {
        std::vector<EmbedSample> eb;
        for (std::size_t k = 0; k < tc.batch_size && !order.empty(); ++k) {
          const auto& t = ckg.triplets()[order[cursor++ % order.size()]];
          eb.push_back({t.head, t.relation, t.tail, sample_negative_tail(ckg, t.head, t.relation, rng)});
        }
        auto batch = sample_bpr_batch(ckg, tc.batch_size, rng);
        auto grads = model.params().zeros();
        embed_total += model.embed_loss_grad(eb, grads);
        pred_total += model.bpr_loss_grad(batch, attention, true, &rng, grads);
        l2_grad(model.params(), ckg.num_users(), tc.lambda_user, tc.lambda_item, grads);
        apply_gradients(opt, model.params(), grads);
      }
      rec.embed_loss = embed_total / static_cast<double>(pred_batches);
      rec.pred_loss = pred_total / static_cast<double>(pred_batches);
    }
    if (!std::isfinite(rec.embed_loss) || !std::isfinite(rec.pred_loss) || !model.params().all_finite()) {
      diverged("training diverged at epoch " + std::to_string(rec.epoch));
    }
    if (monitor) {
      const auto report = evaluate(model.representations(), ckg, Fold::validation, tc.k, true, tc.threads);
      rec.valid_recall = report.recall;
      rec.valid_ndcg = report.ndcg;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (!monitor || rec.valid_recall > result.best_recall) {
      result.best_recall = rec.valid_recall;
      result.best_ndcg = rec.valid_ndcg;
      result.best_epoch = rec.epoch;
      result.params = model.params();
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  result.epochs_run = start_epoch + result.history.size();
  return result;
}

/// One line per epoch: "epoch=N embed_loss=... pred_loss=... valid_recall@K=... valid_ndcg@K=...".
inline std::string format_history(const std::vector<EpochRecord>& history, std::size_t k) {
  std::ostringstream os;
  for (const auto& r : history) {
    os << "epoch=" << r.epoch << " embed_loss=" << format_double(r.embed_loss)
       << " pred_loss=" << format_double(r.pred_loss) << " valid_recall@" << k << '='
       << format_double(r.valid_recall) << " valid_ndcg@" << k << '=' << format_double(r.valid_ndcg) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian binary:
//   "KGIFCKPT" | u32 version | model config | u64 counts | id maps |
//   metadata | opaque run-config text | u32 tensor count |
//   dimension table (name, rows, cols)* | raw f64 payloads in table order.
// A sidecar "<path>.manifest" lists "name rows cols" per tensor.

inline constexpr char kCheckpointMagic[8] = {'K', 'G', 'I', 'F', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct CheckpointMeta {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_recall = 0.0;
  double best_ndcg = 0.0;
  std::string run_config;  // free-form text, stored verbatim
  std::vector<ExternalId> user_ids, item_ids, attribute_ids, relation_ids;
  std::uint64_t num_entities = 0, num_relations = 0;
  bool inverse = true;
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  CheckpointMeta meta;
};

inline CheckpointMeta checkpoint_meta_for(const CollaborativeKG& ckg) {
  CheckpointMeta m;
  m.user_ids = ckg.train().user_ids();
  m.item_ids = ckg.train().item_ids();
  m.attribute_ids = ckg.attribute_ids();
  m.relation_ids = ckg.kg_relation_ids();
  m.num_entities = ckg.num_entities();
  m.num_relations = ckg.num_relations();
  m.inverse = ckg.has_inverse();
  return m;
}

namespace detail {

class BinaryWriter {
public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }
  template <class T>
  void put_vector(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    for (const auto& x : v) put(x);
  }
  void put_raw(std::span<const double> v) {
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  const std::string& bytes() const { return buf_; }

private:
  std::string buf_;
};

class BinaryReader {
public:
  explicit BinaryReader(std::string data) : data_(std::move(data)) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <class T>
  std::vector<T> get_vector() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(T));
    std::vector<T> v(n);
    for (auto& x : v) x = get<T>();
    return v;
  }
  void get_raw(std::span<double> out) {
    need(out.size() * sizeof(double));
    std::memcpy(out.data(), data_.data() + pos_, out.size() * sizeof(double));
    pos_ += out.size() * sizeof(double);
  }
  bool at_end() const { return pos_ == data_.size(); }

private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError("checkpoint truncated");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const ModelConfig& cfg, const ModelParams& params, const CheckpointMeta& meta) {
  detail::BinaryWriter w;
  for (char c : kCheckpointMagic) w.put(c);
  w.put(kCheckpointVersion);
  w.put<std::uint64_t>(cfg.embed.dim);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.embed.mode));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.embed.loss_order));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.fusion.type));
  w.put<std::uint8_t>(cfg.fusion.shared_weights ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.fusion.context));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.stack.aggregator));
  w.put<double>(cfg.stack.dropout);
  std::vector<std::uint64_t> dims(cfg.stack.dims.begin(), cfg.stack.dims.end());
  w.put_vector(dims);
  w.put<std::uint64_t>(meta.num_entities);
  w.put<std::uint64_t>(meta.num_relations);
  w.put<std::uint8_t>(meta.inverse ? 1 : 0);
  w.put_vector(meta.user_ids);
  w.put_vector(meta.item_ids);
  w.put_vector(meta.attribute_ids);
  w.put_vector(meta.relation_ids);
  w.put<std::uint64_t>(meta.epochs_run);
  w.put<std::uint64_t>(meta.best_epoch);
  w.put<double>(meta.best_recall);
  w.put<double>(meta.best_ndcg);
  w.put_string(meta.run_config);
  const auto tensors = params.tensors();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    w.put_string(name);
    w.put<std::uint64_t>(m->rows());
    w.put<std::uint64_t>(m->cols());
  }
  for (const auto& [name, m] : tensors) w.put_raw(m->flat());
  return w.bytes();
}

inline std::string checkpoint_manifest(const ModelParams& params) {
  std::ostringstream os;
  for (const auto& [name, m] : params.tensors()) os << name << ' ' << m->rows() << ' ' << m->cols() << '\n';
  return os.str();
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params,
                            const CheckpointMeta& meta) {
  const auto bytes = serialize_checkpoint(cfg, params, meta);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
  }
  std::ofstream man(path + ".manifest", std::ios::binary);
  if (!man) throw IoError("cannot write '" + path + ".manifest'");
  man << checkpoint_manifest(params);
}

inline Checkpoint parse_checkpoint(std::string bytes) {
  detail::BinaryReader r(std::move(bytes));
  for (char c : kCheckpointMagic) {
    if (r.get<char>() != c) throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  auto& cfg = ck.config;
  cfg.embed.dim = r.get<std::uint64_t>();
  cfg.embed.mode = static_cast<EmbedMode>(r.get<std::uint8_t>());
  cfg.embed.loss_order = static_cast<LossOrder>(r.get<std::uint8_t>());
  cfg.fusion.type = static_cast<FusionType>(r.get<std::uint8_t>());
  cfg.fusion.shared_weights = r.get<std::uint8_t>() != 0;
  cfg.fusion.context = static_cast<FusionContext>(r.get<std::uint8_t>());
  cfg.stack.aggregator = static_cast<Aggregator>(r.get<std::uint8_t>());
  cfg.stack.dropout = r.get<double>();
  auto dims = r.get_vector<std::uint64_t>();
  cfg.stack.dims.assign(dims.begin(), dims.end());
  auto& meta = ck.meta;
  meta.num_entities = r.get<std::uint64_t>();
  meta.num_relations = r.get<std::uint64_t>();
  meta.inverse = r.get<std::uint8_t>() != 0;
  meta.user_ids = r.get_vector<ExternalId>();
  meta.item_ids = r.get_vector<ExternalId>();
  meta.attribute_ids = r.get_vector<ExternalId>();
  meta.relation_ids = r.get_vector<ExternalId>();
  meta.epochs_run = r.get<std::uint64_t>();
  meta.best_epoch = r.get<std::uint64_t>();
  meta.best_recall = r.get<double>();
  meta.best_ndcg = r.get<double>();
  meta.run_config = r.get_string();

  // Rebuild the parameter structure from the config, then fill by name.
  ModelParams& p = ck.params;
  const std::size_t d = cfg.embed.dim;
  const auto ne = meta.num_entities, nr = meta.num_relations;
  p.embed.mode = cfg.embed.mode;
  p.embed.entity = Matrix(ne, d);
  p.embed.relation = Matrix(nr, d);
  if (cfg.embed.mode == EmbedMode::transd) {
    p.embed.entity_proj = Matrix(ne, d);
    p.embed.relation_proj = Matrix(nr, d);
  } else {
    p.embed.relation_mat = Matrix(nr * d, d);
  }
  p.fusion.shared = cfg.fusion.shared_weights;
  const std::size_t fin = fused_input_dim(cfg.fusion.type, d);
  p.fusion.w1 = Matrix(fin, d);
  if (!p.fusion.shared) p.fusion.w2 = Matrix(fin, d);
  p.fusion.bias = Matrix(1, d);
  std::size_t in = d;
  for (auto out : cfg.stack.dims) {
    LayerWeights lw;
    lw.w1 = Matrix(cfg.stack.aggregator == Aggregator::graphsage ? 2 * in : in, out);
    if (cfg.stack.aggregator == Aggregator::bi_interaction) lw.w2 = Matrix(in, out);
    p.layers.push_back(std::move(lw));
    in = out;
  }
  auto tensors = p.tensors();
  const auto count = r.get<std::uint32_t>();
  if (count != tensors.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(tensors.size()));
  }
  for (const auto& [name, m] : tensors) {
    const auto stored = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (stored != name || rows != m->rows() || cols != m->cols()) {
      throw CheckpointError("tensor '" + stored + "' " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " does not match expected '" + name + "' " + std::to_string(m->rows()) + "x" +
                            std::to_string(m->cols()));
    }
  }
  for (auto& [name, m] : tensors) r.get_raw(m->flat());
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(std::move(bytes));
}

/// Throws CheckpointError when the checkpoint was trained on a different graph.
inline void check_compatible(const Checkpoint& ck, const CollaborativeKG& ckg) {
  const auto& m = ck.meta;
  if (m.num_entities != ckg.num_entities() || m.num_relations != ckg.num_relations()) {
    throw CheckpointError("checkpoint shape " + std::to_string(m.num_entities) + " entities / " +
                          std::to_string(m.num_relations) + " relations does not match dataset " +
                          std::to_string(ckg.num_entities()) + " / " + std::to_string(ckg.num_relations()));
  }
  if (m.user_ids != ckg.train().user_ids() || m.item_ids != ckg.train().item_ids() ||
      m.attribute_ids != ckg.attribute_ids() || m.relation_ids != ckg.kg_relation_ids()) {
    throw CheckpointError("checkpoint id maps do not match the dataset");
  }
}

}  // namespace kgif
