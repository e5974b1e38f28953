#include <doctest.h>

#include <cmath>
#include <sstream>

#include "desocial/selection.hpp"
#include "support.hpp"

using namespace desocial;

namespace {

SnapshotSequence small_sequence(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_users = 8;
  spec.num_edges = 24;
  spec.slices = 4;
  spec.model = SyntheticModel::Uniform;
  spec.seed = seed;
  return generate_synthetic(spec);
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("pair sample weights") {
  std::vector<TimestampedEdge> edges = {{0, 1, 0, 0}, {2, 3, 1, 1}, {0, 2, 2, 2}, {1, 3, 3, 3}};
  const auto seq = partition_slices(edges, 2, 5);  // (0,1),(2,3) | (0,2),(1,3)
  const auto view = cumulative_view(seq, 1);
  Rng rng(4);
  const auto none = sample_pair_set(0, view, seq, 50, 0.0, rng);
  CHECK(none.pairs.size() == 50);
  for (const auto& p : none.pairs) CHECK(p.weight == 1.0);

  const auto decay = sample_pair_set(0, view, seq, 200, -1.0, rng);
  bool saw_old = false;
  bool saw_new = false;
  for (const auto& p : decay.pairs) {
    CHECK(view.has_edge(0, p.positive));
    CHECK_FALSE(view.has_edge(0, p.negative));
    CHECK(p.negative != 0);
    if (p.positive == 2) {
      CHECK(p.weight == 1.0);
      saw_new = true;
    } else {
      CHECK(p.emerged == 0);
      CHECK(p.weight == doctest::Approx(0.367879441));
      saw_old = true;
    }
  }
  CHECK(saw_old);
  CHECK(saw_new);
  CHECK_THROWS_WITH(sample_pair_set(4, view, seq, 5, -0.1, rng), "no positive neighbors");
}

TEST_CASE("select_algorithm dominance, ties and singleton") {
  PairSample sample;
  sample.owner = 0;
  sample.pairs = {{1, 2, 1.0, 0}, {1, 3, 0.5, 0}};
  testing::TableScorer good;
  good.set(0, 1, 0.9);
  testing::TableScorer bad;
  bad.set(0, 2, 0.9);
  bad.set(0, 3, 0.9);
  CHECK(select_algorithm(sample, {{BackboneKind::MLP, &bad}, {BackboneKind::SGC, &good}}) == BackboneKind::SGC);
  CHECK(select_algorithm(sample, {{BackboneKind::SGC, &good}, {BackboneKind::MLP, &bad}}) == BackboneKind::SGC);
  // equal totals: canonical order wins regardless of listing order
  CHECK(select_algorithm(sample, {{BackboneKind::SAGE, &good}, {BackboneKind::GCN, &good}}) == BackboneKind::GCN);
  CHECK(select_algorithm(sample, {{BackboneKind::GAT, &bad}}) == BackboneKind::GAT);
  CHECK_THROWS(select_algorithm(sample, {}));

  // equal scores never count
  testing::TableScorer flat(0.4);
  CHECK(selection_score(sample, flat) == 0.0);
}

TEST_CASE("selection is invariant to monotone rescaling and weight scaling") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    PairSample sample;
    sample.owner = 0;
    for (int i = 0; i < 8; ++i) {
      sample.pairs.push_back({static_cast<UserId>(1 + uniform_below(rng, 6)),
                              static_cast<UserId>(1 + uniform_below(rng, 6)), 0.1 + uniform01(rng), 0});
    }
    testing::TableScorer a;
    testing::TableScorer b;
    testing::TableScorer a_cubed;
    for (UserId q = 1; q <= 6; ++q) {
      const double x = uniform01(rng);
      a.set(0, q, x);
      a_cubed.set(0, q, x * x * x + 2.0);
      b.set(0, q, uniform01(rng));
    }
    const auto base = select_algorithm(sample, {{BackboneKind::MLP, &a}, {BackboneKind::GCN, &b}});
    CHECK(select_algorithm(sample, {{BackboneKind::MLP, &a_cubed}, {BackboneKind::GCN, &b}}) == base);
    auto scaled = sample;
    for (auto& p : scaled.pairs) p.weight *= 3.0;
    CHECK(select_algorithm(scaled, {{BackboneKind::MLP, &a}, {BackboneKind::GCN, &b}}) == base);
  }
}

TEST_CASE("rule table examples") {
  const BackbonePool full(kAllBackbones.begin(), kAllBackbones.end());
  CHECK(rule_based_select({0, 7, 0.3}, full) == BackboneKind::SGC);
  CHECK(rule_based_select({0, 2, 0.0}, full) == BackboneKind::MLP);
  CHECK(rule_based_select({0, 3, 0.1}, {BackboneKind::GAT}) == BackboneKind::GAT);
  CHECK(rule_based_select({0, 5, 0.1}, full) == BackboneKind::SAGE);
  CHECK(rule_based_select({0, 3, 0.5}, full) == BackboneKind::GCN);
  CHECK(rule_based_select({0, 3, 0.3}, full) == BackboneKind::SGC);
}

TEST_CASE("strategy parsing") {
  CHECK(parse_strategy("personalized").kind == SelectionStrategy::Personalized);
  CHECK(parse_strategy("rule").kind == SelectionStrategy::Rule);
  CHECK(parse_strategy("random").kind == SelectionStrategy::Random);
  const auto fixed = parse_strategy("fixed:sgc");
  CHECK(fixed.kind == SelectionStrategy::Fixed);
  CHECK(fixed.fixed == BackboneKind::SGC);
  CHECK(to_string(fixed) == "fixed:SGC");
  CHECK_THROWS(parse_strategy("greedy"));
  CHECK(parse_pool("GCN+SAGE") == BackbonePool{BackboneKind::GCN, BackboneKind::SAGE});
  CHECK_THROWS(parse_pool("GCN,GCN"));
  CHECK_THROWS(parse_pool(""));
}

TEST_CASE("assign_all strategies") {
  const auto seq = small_sequence(2);
  const auto view = cumulative_view(seq, 3);
  const BackbonePool full(kAllBackbones.begin(), kAllBackbones.end());
  std::vector<UserId> users(10);
  for (UserId u = 0; u < 8; ++u) users[u] = u;
  users.resize(8);

  SelectionContext ctx;
  ctx.pool = full;
  ctx.view = &view;
  ctx.seq = &seq;
  ctx.seed = 3;
  ctx.period = 4;

  SUBCASE("fixed") {
    const auto a = assign_all(StrategySpec::fixed_to(BackboneKind::SGC), users, ctx);
    CHECK(a.users_of(BackboneKind::SGC).size() == 8);
    CHECK(a.users_of(BackboneKind::MLP).empty());
  }
  SUBCASE("rule follows the table") {
    const auto a = assign_all({SelectionStrategy::Rule}, users, ctx);
    for (UserId u : users) CHECK(a.choice_of(u) == rule_based_select(clustering_coefficient(view, u), full));
  }
  SUBCASE("random is roughly uniform") {
    CumulativeView wide(10000, std::vector<EdgePair>{});
    ctx.view = &wide;
    std::vector<UserId> many(10000);
    for (UserId u = 0; u < 10000; ++u) many[u] = u;
    const auto a = assign_all({SelectionStrategy::Random}, many, ctx);
    for (auto kind : kAllBackbones) {
      const auto count = static_cast<double>(a.users_of(kind).size());
      CHECK(std::abs(count - 2000.0) <= 150.0);
    }
  }
  SUBCASE("personalized matches per-user selection and inverse map") {
    testing::HashScorer h1(1);
    testing::HashScorer h2(2);
    ctx.pool = {BackboneKind::GCN, BackboneKind::SAGE};
    ctx.candidates = {{BackboneKind::GCN, &h1}, {BackboneKind::SAGE, &h2}};
    ctx.gamma = 10;
    const auto a = assign_all({SelectionStrategy::Personalized}, users, ctx);
    for (UserId u : users) {
      const auto kind = a.choice_of(u);
      CHECK(pool_contains(ctx.pool, kind));
      const auto& holders = a.users_of(kind);
      CHECK(std::count(holders.begin(), holders.end(), u) == 1);
      if (view.degree(u) == 0 || view.degree(u) + 1 >= 8) continue;
      Rng rng = make_stream(3, StreamTag::Selection, u, 4);
      const auto sample = sample_pair_set(u, view, seq, 10, ctx.alpha, rng);
      CHECK(kind == select_algorithm(sample, ctx.candidates));
    }
    std::size_t total = 0;
    for (auto kind : ctx.pool) total += a.users_of(kind).size();
    CHECK(total == users.size());
  }
  SUBCASE("isolated users fall back to the rule table") {
    CumulativeView sparse(8, std::vector<EdgePair>{{0, 1}});
    ctx.view = &sparse;
    testing::HashScorer h1(1);
    ctx.candidates = {};
    for (auto kind : kAllBackbones) ctx.candidates.emplace_back(kind, &h1);
    const std::vector<UserId> lonely = {5};
    const auto a = assign_all({SelectionStrategy::Personalized}, lonely, ctx);
    CHECK(a.choice_of(5) == BackboneKind::MLP);
  }
}

TEST_CASE("assignment csv") {
  AlgorithmAssignment a(StrategySpec::fixed_to(BackboneKind::GAT));
  a.assign(3, BackboneKind::GAT);
  a.assign(1, BackboneKind::GAT);
  std::ostringstream out;
  write_assignment_csv(a, out);
  CHECK(out.str() == "user,backbone\n1,GAT\n3,GAT\n");
}

}  // TEST_SUITE
