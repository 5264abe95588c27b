#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "support/toy.hpp"

using namespace kgif;
using kgif::testing::pairs_over;

namespace {

std::string write_tmp(const std::string& name, const std::string& text) {
  const auto dir = std::string(KGIF_TEST_TMP);
  std::filesystem::create_directories(dir);
  const auto path = dir + "/" + name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::set<std::pair<ExternalId, ExternalId>> external_pairs(const InteractionSet& s) {
  std::set<std::pair<ExternalId, ExternalId>> out;
  for (auto [u, i] : s.pairs()) out.emplace(s.user_ids()[u], s.item_ids()[i]);
  return out;
}

}  // namespace

TEST(LoadInteractions, ParsesUserMajorLines) {
  const auto s = load_interactions(write_tmp("a.txt", "0 5 7\n"));
  EXPECT_EQ(external_pairs(s), (std::set<std::pair<ExternalId, ExternalId>>{{0, 5}, {0, 7}}));
  EXPECT_EQ(s.num_users(), 1u);
  EXPECT_EQ(s.num_items(), 2u);
}

TEST(LoadInteractions, DeduplicatesAcrossLinesAndFiles) {
  const auto a = write_tmp("dup1.txt", "0 5\n0 5\n");
  const auto b = write_tmp("dup2.txt", "0 5\n3 9\n");
  const auto s = load_interactions(std::vector<std::string>{a, b});
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.user_ids(), (std::vector<ExternalId>{0, 3}));
}

TEST(LoadInteractions, MalformedLineReportsLineNumber) {
  try {
    load_interactions(write_tmp("bad.txt", "0 5\n1 x7\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_EQ(e.kind(), "parse");
  }
}

TEST(LoadInteractions, EmptyFileAndMissingFile) {
  EXPECT_THROW(load_interactions(write_tmp("empty.txt", "")), DataError);
  EXPECT_THROW(load_interactions(std::string(KGIF_TEST_TMP) + "/nope.txt"), IoError);
}

TEST(LoadKg, ThreeDistinctTriples) {
  const auto kg = load_kg(write_tmp("kg.txt", "1 0 9\n2 0 9\n1 4 8\n1 0 9\n"));
  EXPECT_EQ(kg.triples.size(), 3u);
  EXPECT_EQ(kg.relation_ids, (std::vector<ExternalId>{0, 4}));
  EXPECT_THROW(load_kg(write_tmp("kg_bad.txt", "1 0\n")), ParseError);
}

TEST(NCore, OneIsIdentity) {
  auto s = pairs_over({1, 2}, {10, 11, 12}, {{0, 0}, {0, 2}, {1, 1}});
  EXPECT_EQ(ncore_filter(s, 1), s);
}

TEST(NCore, CascadesToFixedPoint) {
  // a: items x, y, z; b: item w only. n = 2 removes b, then w (orphaned),
  // then x, y, z each have degree 1 and go too.
  auto s = pairs_over({1, 2}, {10, 11, 12, 13}, {{0, 0}, {0, 1}, {0, 2}, {1, 3}});
  EXPECT_THROW(ncore_filter(s, 2), DataError);

  // Item 12 drops first; user 3 then falls to degree 1 and drops next round.
  auto t = pairs_over({1, 2, 3}, {10, 11, 12}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 2}, {2, 0}});
  const auto f = ncore_filter(t, 2);
  EXPECT_EQ(f.user_ids(), (std::vector<ExternalId>{1, 2}));
  EXPECT_EQ(f.item_ids(), (std::vector<ExternalId>{10, 11}));
  EXPECT_EQ(f.size(), 4u);
  // Reapplying is the identity.
  EXPECT_EQ(ncore_filter(f, 2), ncore_filter(ncore_filter(f, 2), 2));
}

TEST(NCore, MatchesBruteForceIteration) {
  Random rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::set<std::pair<ExternalId, ExternalId>> pairs;
    for (int k = 0; k < 60; ++k) pairs.emplace(rng.index(12), 100 + rng.index(15));
    std::vector<std::pair<ExternalId, ExternalId>> v(pairs.begin(), pairs.end());
    const auto s = interactions_from_external(v);
    // Brute force: remove one under-degree node at a time.
    auto cur = pairs;
    for (bool changed = true; changed;) {
      changed = false;
      std::map<ExternalId, int> ud, id;
      for (auto [u, i] : cur) ++ud[u], ++id[i];
      for (auto it = cur.begin(); it != cur.end(); ++it) {
        if (ud[it->first] < 3 || id[it->second] < 3) {
          cur.erase(it);
          changed = true;
          break;
        }
      }
    }
    if (cur.empty()) {
      EXPECT_THROW(ncore_filter(s, 3), DataError);
    } else {
      EXPECT_EQ(external_pairs(ncore_filter(s, 3)), cur);
    }
  }
}

TEST(Split, TenInteractionsGive721) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> p;
  std::vector<ExternalId> items;
  for (std::uint32_t i = 0; i < 10; ++i) {
    p.emplace_back(0, i);
    items.push_back(i);
  }
  const auto s = split(pairs_over({0}, items, p), {}, 11);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.validation.size(), 1u);
}

TEST(Split, SingleInteractionStaysInTrain) {
  const auto s = split(pairs_over({0}, {5}, {{0, 0}}), {}, 1);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_TRUE(s.test.empty());
  EXPECT_TRUE(s.validation.empty());
}

TEST(Split, PartitionsExactlyAndIsDeterministic) {
  Random rng(8);
  std::vector<std::pair<ExternalId, ExternalId>> v;
  for (int k = 0; k < 300; ++k) v.emplace_back(rng.index(20), rng.index(40));
  const auto all = interactions_from_external(v);
  const auto a = split(all, {}, 5), b = split(all, {}, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.validation, b.validation);
  auto tr = external_pairs(a.train), te = external_pairs(a.test), va = external_pairs(a.validation);
  EXPECT_EQ(tr.size() + te.size() + va.size(), all.size());
  std::set<std::pair<ExternalId, ExternalId>> u = tr;
  u.insert(te.begin(), te.end());
  u.insert(va.begin(), va.end());
  EXPECT_EQ(u, external_pairs(all));
  for (std::uint32_t user = 0; user < all.num_users(); ++user) EXPECT_GE(a.train.items_of(user).size(), 1u);
}

TEST(Split, UserWithoutInteractionsThrows) {
  const auto s = pairs_over({0, 1}, {5}, {{0, 0}});
  EXPECT_THROW(split(s, {}, 1), DataError);
}

TEST(Split, ManifestRoundTrip) {
  Random rng(2);
  std::vector<std::pair<ExternalId, ExternalId>> v;
  for (int k = 0; k < 100; ++k) v.emplace_back(rng.index(10), 50 + rng.index(20));
  const auto s = split(interactions_from_external(v), {}, 9);
  const auto path = std::string(KGIF_TEST_TMP) + "/manifest.txt";
  write_split_manifest(s, path);
  const auto r = read_split_manifest(path);
  EXPECT_EQ(external_pairs(r.train), external_pairs(s.train));
  EXPECT_EQ(external_pairs(r.test), external_pairs(s.test));
  EXPECT_EQ(external_pairs(r.validation), external_pairs(s.validation));
}

TEST(BuildCkg, SingleInteraction) {
  const auto train = pairs_over({0}, {1}, {{0, 0}});
  const auto g = build_ckg(train, bind_knowledge({}, train.item_ids()), false);
  ASSERT_EQ(g.num_triplets(), 1u);
  EXPECT_EQ(g.triplets()[0], (Triplet{0, CollaborativeKG::kInteract, 1}));
}

TEST(BuildCkg, InverseMirrorsEveryTriplet) {
  const auto train = pairs_over({0}, {1}, {{0, 0}});
  KnowledgeTriples kg{{3}, {{1, 0, 50}}};
  const auto g = build_ckg(train, bind_knowledge(kg, train.item_ids()), true);
  EXPECT_EQ(g.num_triplets(), 4u);
  for (const auto& t : g.triplets()) EXPECT_TRUE(g.contains(t.tail, g.inverse_of(t.relation), t.head));
  EXPECT_EQ(g.relation_name(g.inverse_of(1)), "r3_inv");
}

TEST(BuildCkg, CountsAndHoldoutExclusion) {
  const auto g = kgif::testing::toy_ckg();
  EXPECT_EQ(g.num_entities(), 8u);
  EXPECT_EQ(g.num_triplets(), 2 * (g.train().size() + g.num_kg_triplets()));
  for (auto [u, i] : g.test().pairs()) EXPECT_FALSE(g.contains(g.user_entity(u), 0, g.item_entity(i)));
  for (auto [u, i] : g.validation().pairs()) EXPECT_FALSE(g.contains(g.user_entity(u), 0, g.item_entity(i)));
  EXPECT_EQ(g.kind(0), EntityKind::user);
  EXPECT_EQ(g.kind(3), EntityKind::item);
  EXPECT_EQ(g.kind(6), EntityKind::attribute);
  EXPECT_EQ(g.entity_label(6), "entity:200");
}

TEST(BuildCkg, MismatchedIdSpacesThrow) {
  const auto train = pairs_over({0}, {1}, {{0, 0}});
  const auto other = pairs_over({0}, {2}, {{0, 0}});
  EXPECT_THROW(build_ckg(train, bind_knowledge({}, train.item_ids()), true, &other), DataError);
}

TEST(Ego, FiveTailsAndIsolated) {
  std::vector<ExternalId> items{0, 1, 2, 3, 4, 5};
  const auto train = pairs_over({9}, items, {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const auto g = build_ckg(train, bind_knowledge({}, items), false);
  EXPECT_EQ(ego(g, 0).size(), 5u);
  EXPECT_TRUE(ego(g, g.item_entity(5)).empty());
  EXPECT_THROW(ego(g, 99), DataError);
}

TEST(Ego, MirroredCountsMatchEdgeScan) {
  const auto g = kgif::testing::toy_ckg(true);
  for (EntityId e = 0; e < g.num_entities(); ++e) {
    std::size_t as_head = 0;
    for (const auto& t : g.triplets()) as_head += t.head == e;
    EXPECT_EQ(ego(g, e).size(), as_head);
    const auto net = ego(g, e);
    EXPECT_TRUE(std::is_sorted(net.edges.begin(), net.edges.end()));
  }
}

TEST(NegativeTail, ForcedOutcome) {
  // User 0 interacts with all items but the last; with no inverse edges and
  // the (0, interact, ·) pool covering every other entity except one item.
  std::vector<ExternalId> items{0, 1, 2};
  const auto train = pairs_over({7}, items, {{0, 0}, {0, 1}});
  const auto g = build_ckg(train, bind_knowledge({}, items), false);
  // Entities: user 0, items 1..3. Tails present: 1, 2. Valid: 0 and 3.
  Random rng(1);
  std::set<EntityId> seen;
  for (int k = 0; k < 200; ++k) seen.insert(sample_negative_tail(g, 0, 0, rng));
  EXPECT_EQ(seen, (std::set<EntityId>{0, 3}));
}

TEST(NegativeTail, UniformOverValidTails) {
  const auto g = kgif::testing::toy_ckg();
  Random rng(4);
  const EntityId h = 0;
  const RelationId r = 0;
  std::vector<EntityId> valid;
  for (EntityId t = 0; t < g.num_entities(); ++t) {
    if (!g.contains(h, r, t)) valid.push_back(t);
  }
  std::map<EntityId, int> counts;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) ++counts[sample_negative_tail(g, h, r, rng)];
  double chi2 = 0;
  const double expected = static_cast<double>(draws) / valid.size();
  for (auto t : valid) chi2 += std::pow(counts[t] - expected, 2) / expected;
  EXPECT_EQ(counts.size(), valid.size());
  // 5 degrees of freedom; the 0.999 quantile is 20.5.
  EXPECT_LT(chi2, 20.5);
  Random a(5), b(5);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(sample_negative_tail(g, h, r, a), sample_negative_tail(g, h, r, b));
}

TEST(BprTriple, ForcedSingleUser) {
  const auto train = pairs_over({0}, {1, 2}, {{0, 0}});
  const auto g = build_ckg(train, bind_knowledge({}, train.item_ids()), true);
  Random rng(3);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(sample_bpr_triple(g, rng), (BprTriple{0, 0, 1}));
}

TEST(BprTriple, NegativesAreNeverPositives) {
  const auto g = kgif::testing::toy_ckg();
  Random rng(6), again(6);
  for (int k = 0; k < 10000; ++k) {
    const auto b = sample_bpr_triple(g, rng);
    EXPECT_TRUE(g.train().contains(b.user, b.positive));
    EXPECT_FALSE(g.train().contains(b.user, b.negative));
    EXPECT_EQ(b, sample_bpr_triple(g, again));
  }
}

TEST(BprTriple, SaturatedUsersThrow) {
  const auto train = pairs_over({0}, {1}, {{0, 0}});
  const auto g = build_ckg(train, bind_knowledge({}, train.item_ids()), true);
  Random rng(1);
  EXPECT_THROW(sample_bpr_triple(g, rng), DataError);
}

TEST(Stats, DensityDefinitions) {
  const auto g = kgif::testing::toy_ckg();
  const auto s = graph_stats(g);
  EXPECT_EQ(s.users, 3u);
  EXPECT_EQ(s.items, 3u);
  EXPECT_EQ(s.interactions, 7u);
  EXPECT_DOUBLE_EQ(s.interaction_density, 7.0 / 9.0);
  EXPECT_EQ(s.kg_entities, 5u);
  EXPECT_DOUBLE_EQ(s.kg_density, 4.0 / (5.0 * 3.0 * 2.0));
}
