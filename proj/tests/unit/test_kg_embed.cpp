#include <gtest/gtest.h>

#include <cmath>

#include "support/toy.hpp"

using namespace kgif;

namespace {

EmbedParams two_dim_params() {
  EmbedParams p;
  p.mode = EmbedMode::transd;
  p.entity = Matrix(2, 2);
  p.entity_proj = Matrix(2, 2);
  p.relation = Matrix(1, 2);
  p.relation_proj = Matrix(1, 2);
  return p;
}

std::vector<EmbedSample> toy_batch(const CollaborativeKG& g, std::uint64_t seed) {
  Random rng(seed);
  std::vector<EmbedSample> batch;
  for (const auto& t : g.triplets()) {
    batch.push_back({t.head, t.relation, t.tail, sample_negative_tail(g, t.head, t.relation, rng)});
  }
  return batch;
}

}  // namespace

TEST(Project, ZeroProjectionVectorsGiveIdentity) {
  const auto g = kgif::testing::toy_ckg();
  auto p = init_embed_params(g.num_entities(), g.num_relations(), {8}, 3);
  auto q = p;
  p.entity_proj.fill(0.0);
  q.relation_proj.fill(0.0);
  for (EntityId e = 0; e < g.num_entities(); ++e) {
    for (RelationId r = 0; r < g.num_relations(); ++r) {
      const auto row = p.entity.row(e);
      const Vector raw(row.begin(), row.end());
      EXPECT_EQ(project(p, e, r, Role::head), raw);
      EXPECT_EQ(project(q, e, r, Role::tail), raw);
    }
  }
}

TEST(Project, HandEvaluatedOuterProduct) {
  auto p = two_dim_params();
  p.entity(0, 0) = 1.0;
  p.entity_proj(0, 1) = 1.0;
  p.relation_proj(0, 0) = 2.0;
  p.relation_proj(0, 1) = 3.0;
  EXPECT_EQ(project(p, 0, 0, Role::head), (Vector{1.0, 0.0}));
  p.entity_proj(0, 0) = 1.0;
  p.entity_proj(0, 1) = 0.0;
  EXPECT_EQ(project(p, 0, 0, Role::head), (Vector{3.0, 3.0}));
  EXPECT_THROW(project(p, 5, 0, Role::head), DimensionError);
}

TEST(Project, TransDMatchesIdentityTransR) {
  const auto g = kgif::testing::toy_ckg();
  auto d = init_embed_params(g.num_entities(), g.num_relations(), {6, EmbedMode::transd}, 9);
  auto r = init_embed_params(g.num_entities(), g.num_relations(), {6, EmbedMode::transr}, 9);
  d.entity_proj.fill(0.0);
  r.entity = d.entity;
  for (EntityId e = 0; e < g.num_entities(); ++e) {
    for (RelationId k = 0; k < g.num_relations(); ++k) EXPECT_EQ(project(d, e, k, Role::head), project(r, e, k, Role::head));
  }
}

TEST(Project, ParameterCountsPerRelation) {
  const std::size_t d = 8;
  auto td = init_embed_params(10, 4, {d, EmbedMode::transd}, 1);
  auto tr = init_embed_params(10, 4, {d, EmbedMode::transr}, 1);
  EXPECT_EQ(td.relation.cols() + td.relation_proj.cols(), 2 * d);
  EXPECT_EQ(tr.relation.cols() + tr.relation_mat.size() / 4, d + d * d);
}

TEST(Score, ExactTranslationIsZero) {
  auto p = two_dim_params();
  p.entity(0, 0) = 0.5;
  p.relation(0, 1) = 1.5;
  p.entity(1, 0) = 0.5;
  p.entity(1, 1) = 1.5;
  EXPECT_EQ(score_triplet(p, 0, 0, 1), 0.0);
}

TEST(Score, UnitDisplacement) {
  auto p = two_dim_params();
  p.relation(0, 0) = 1.0;
  EXPECT_EQ(score_triplet(p, 0, 0, 1), -1.0);
}

TEST(Score, MatchesIndependentNorm) {
  const auto g = kgif::testing::toy_ckg();
  auto p = init_embed_params(g.num_entities(), g.num_relations(), {5}, 21);
  for (const auto& t : g.triplets()) {
    // Materialize M = r_p e_pᵀ + I explicitly.
    auto proj = [&](EntityId e) {
      Vector out(5, 0.0);
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
          const double m = p.relation_proj(t.relation, i) * p.entity_proj(e, j) + (i == j ? 1.0 : 0.0);
          out[i] += m * p.entity(e, j);
        }
      }
      return out;
    };
    const auto h = proj(t.head), tt = proj(t.tail);
    double s = 0;
    for (std::size_t i = 0; i < 5; ++i) s += std::pow(h[i] + p.relation(t.relation, i) - tt[i], 2);
    EXPECT_NEAR(score_triplet(p, t.head, t.relation, t.tail), -s, 1e-12);
    EXPECT_LE(score_triplet(p, t.head, t.relation, t.tail), 0.0);
  }
}

TEST(EmbedLoss, EqualScoresGiveLn2) {
  auto p = two_dim_params();
  const std::vector<EmbedSample> batch{{0, 0, 1, 1}};
  EXPECT_NEAR(embed_loss(p, batch), std::log(2.0), 1e-15);
}

TEST(EmbedLoss, ArgumentOrder) {
  auto p = two_dim_params();
  p.entity = Matrix(3, 2);
  p.entity_proj = Matrix(3, 2);
  p.entity(1, 0) = std::sqrt(10.0);  // positive tail: g_pos = -10
  const std::vector<EmbedSample> batch{{0, 0, 1, 2}};  // negative tail at origin: g_neg = 0
  EXPECT_NEAR(embed_margin(p, batch[0], LossOrder::verbatim), 10.0, 1e-12);
  EXPECT_NEAR(embed_loss(p, batch, LossOrder::verbatim), 4.54e-5, 1e-7);
  EXPECT_NEAR(embed_loss(p, batch, LossOrder::verbatim), std::log1p(std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(embed_loss(p, batch, LossOrder::conventional), std::log1p(std::exp(10.0)), 1e-12);
}

class EmbedGradient : public ::testing::TestWithParam<std::tuple<EmbedMode, LossOrder>> {};

TEST_P(EmbedGradient, MatchesFiniteDifferences) {
  const auto [mode, order] = GetParam();
  const auto g = kgif::testing::toy_ckg();
  auto p = init_embed_params(g.num_entities(), g.num_relations(), {4, mode}, 17);
  if (mode == EmbedMode::transr) {
    Random rng(2);
    for (auto& v : p.relation_mat.flat()) v += rng.uniform(-0.3, 0.3);
  }
  const auto batch = toy_batch(g, 5);
  auto grads = p.zeros();
  embed_loss_grad(p, batch, order, grads);
  const auto errs = kgif::testing::gradient_errors<EmbedParams>(
      p, grads, [&] { return embed_loss(p, batch, order); });
  for (const auto& [name, err] : errs) EXPECT_LT(err, 1e-4) << name;
  EXPECT_TRUE(kgif::testing::every_group_nonzero(grads));
}

INSTANTIATE_TEST_SUITE_P(Modes, EmbedGradient,
                         ::testing::Combine(::testing::Values(EmbedMode::transd, EmbedMode::transr),
                                            ::testing::Values(LossOrder::conventional, LossOrder::verbatim)));

TEST(TrainEmbed, LossDecreasesOnToyGraph) {
  // 5 entities, 2 relations, 6 triplets, dim 8.
  const std::vector<ExternalId> users{0}, items{10, 11};
  auto train = kgif::testing::pairs_over(users, items, {{0, 0}, {0, 1}});
  KnowledgeTriples kg6{{0}, {{10, 0, 20}, {11, 0, 21}, {20, 0, 11}, {21, 0, 10}}};
  const auto g6 = build_ckg(train, bind_knowledge(kg6, items), false);
  ASSERT_EQ(g6.num_triplets(), 6u);
  ASSERT_EQ(g6.num_entities(), 5u);
  ASSERT_EQ(g6.num_relations(), 2u);

  EmbedConfig cfg{8};
  auto p = init_embed_params(g6.num_entities(), g6.num_relations(), cfg, 1);
  Optimizer opt(AdamConfig{0.01});
  Random rng(1);
  std::vector<double> losses;
  for (int e = 0; e < 20; ++e) losses.push_back(train_embed_epoch(p, g6, cfg, opt, 4, rng));
  EXPECT_LT(losses.back(), losses.front());
}

TEST(TrainEmbed, ZeroLearningRateAndDeterminism) {
  const auto g = kgif::testing::toy_ckg();
  EmbedConfig cfg{4};
  auto p = init_embed_params(g.num_entities(), g.num_relations(), cfg, 1);
  const auto before = p;
  Optimizer frozen(AdamConfig{0.0});
  Random rng(3);
  train_embed_epoch(p, g, cfg, frozen, 4, rng);
  EXPECT_EQ(p.entity, before.entity);
  EXPECT_EQ(p.relation_proj, before.relation_proj);

  auto run = [&] {
    auto q = init_embed_params(g.num_entities(), g.num_relations(), cfg, 1);
    Optimizer opt(AdamConfig{0.01});
    Random r(7);
    std::vector<double> out;
    for (int e = 0; e < 5; ++e) out.push_back(train_embed_epoch(q, g, cfg, opt, 3, r));
    return out;
  };
  EXPECT_EQ(run(), run());
}
