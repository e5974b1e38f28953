#include <doctest.h>

#include <set>

#include "desocial/evaluation.hpp"
#include "support.hpp"

using namespace desocial;

namespace {

VerificationResult result(UserId requester, std::size_t index, int k, std::vector<bool> votes) {
  VerificationResult r;
  r.requester = requester;
  r.query_index = index;
  r.k = k;
  const auto v = verify(votes);
  r.votes = std::move(votes);
  r.decision = v.decision;
  r.agree_count = v.agree_count;
  return r;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("queries have nested, valid negatives") {
  Rng graph_rng(3);
  const auto edges = testing::random_graph(40, 0.1, graph_rng);
  const CumulativeView view(40, edges);
  Snapshot test;
  test.index = 6;
  test.edges = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  const std::vector<int> ks = {2, 3, 5};
  Rng rng(8);
  const auto set = build_queries(test, view, ks, rng);
  CHECK(set.period == 6);
  CHECK(set.skipped == 0);
  REQUIRE(set.queries.size() == 4);
  for (std::size_t i = 0; i < set.queries.size(); ++i) {
    const auto& q = set.queries[i];
    CHECK(q.index == i);
    CHECK(q.negatives.size() == 4);
    std::set<UserId> distinct(q.negatives.begin(), q.negatives.end());
    CHECK(distinct.size() == 4);
    for (UserId n : q.negatives) {
      CHECK(n != q.positive.first);
      CHECK(n != q.positive.second);
      CHECK_FALSE(view.has_edge(q.positive.first, n));
    }
  }
  Rng again(8);
  const auto repeat = build_queries(test, view, ks, again);
  for (std::size_t i = 0; i < 4; ++i) CHECK(repeat.queries[i].negatives == set.queries[i].negatives);
}

TEST_CASE("queries without enough negatives are skipped") {
  // user 0 touches everyone in a 5-user star: no negatives left
  const std::vector<EdgePair> star = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const CumulativeView view(5, star);
  Snapshot test;
  test.index = 2;
  test.edges = {{0, 1}, {1, 2}};
  const std::vector<int> ks = {2};
  Rng rng(1);
  const auto set = build_queries(test, view, ks, rng);
  CHECK(set.skipped == 1);
  REQUIRE(set.queries.size() == 1);
  CHECK(set.queries[0].positive == EdgePair{1, 2});
  CHECK(set.queries[0].index == 0);
  const std::vector<int> only_one = {1};
  CHECK(build_queries(test, view, only_one, rng).queries.size() == 2);
}

TEST_CASE("acc_single oracles") {
  testing::CoinFixture fx(100, 1.0, 2);
  testing::TableScorer perfect;
  for (UserId u = 0; u < 100; ++u) perfect.set(u, 100, 1.0);
  testing::TableScorer constant(0.3);
  for (int k : {1, 2, 3, 5}) {
    CHECK(acc_single(perfect, fx.queries, k).accuracy() == 1.0);
    CHECK(acc_single(constant, fx.queries, k).correct == (k == 1 ? 100u : 0u));
  }
  CHECK_THROWS(acc_single(perfect, fx.queries, 6));
  CHECK_THROWS(acc_single(perfect, fx.queries, 0));

  // independent uniform scores: the positive wins K-way with probability 1/K
  testing::CoinFixture big(20000, 1.0, 4);
  testing::HashScorer random(17);
  CHECK(std::abs(acc_single(random, big.queries, 2).accuracy() - 0.5) <= 0.01);
  CHECK(std::abs(acc_single(random, big.queries, 5).accuracy() - 0.2) <= 0.01);
}

TEST_CASE("acc_consensus") {
  testing::CoinFixture fx(300, 0.8, 6);
  const auto single = fx.vote(1, 6, {2, 3});
  // with n=1 consensus equals that validator's own Acc@K
  for (int k : {2, 3}) {
    std::size_t own = 0;
    for (const auto& r : single.results) {
      if (r.k != k) continue;
      own += cast_vote(fx.validators.at(r.validators[0]), r.context) ? 1 : 0;
    }
    const auto cell = acc_consensus(single.results, k, 300);
    CHECK(cell.correct == own);
    CHECK(cell.total == 300);
  }
  CHECK_THROWS_WITH(acc_consensus(single.results, 2, 299), "results do not match the query set");
  auto dup = single.results;
  dup.push_back(dup.front());
  CHECK_THROWS(acc_consensus(dup, 2));
  CHECK(acc_consensus(single.results, 7).total == 0);
}

TEST_CASE("full agreement by quartile") {
  const std::array<std::vector<UserId>, 4> quartiles = {{{0}, {1}, {2}, {3}}};
  const std::vector<VerificationResult> results = {
      result(0, 0, 2, {true, true, true}),   result(0, 1, 2, {true, true, false}),
      result(1, 2, 2, {false, false, true}), result(2, 3, 2, {true, true, true}),
      result(2, 4, 3, {true, false, false}),  // other K, ignored
  };
  const auto report = full_agreement_by_quartile(results, quartiles, 2);
  CHECK(report.per_quartile[0].accepted == 2);
  CHECK(report.per_quartile[0].unanimous == 1);
  CHECK(*report.per_quartile[0].proportion() == 0.5);
  CHECK_FALSE(report.per_quartile[1].proportion().has_value());
  CHECK(*report.per_quartile[2].proportion() == 1.0);
  CHECK_FALSE(report.per_quartile[3].proportion().has_value());

  AgreementReport merged = report;
  merged.merge(report);
  CHECK(merged.per_quartile[0].accepted == 4);

  const std::vector<VerificationResult> stray = {result(9, 0, 2, {true})};
  CHECK_THROWS(full_agreement_by_quartile(stray, quartiles, 2));
  const std::array<std::vector<UserId>, 4> overlapping = {{{0}, {0}, {}, {}}};
  CHECK_THROWS(full_agreement_by_quartile(results, overlapping, 2));
}

TEST_CASE("acc report aggregation") {
  AccReport r;
  r.add(3, 2, {3, 4});
  r.add(4, 2, {1, 6});
  r.add(3, 5, {1, 4});
  r.add(4, 5, {0, 6});
  CHECK(r.overall().at(2) == doctest::Approx(0.4));
  CHECK(r.overall().at(5) == doctest::Approx(0.1));
  CHECK(r.per_period().at({3, 2}) == 0.75);
  CHECK(r.query_count() == std::map<Period, std::size_t>{{3, 4}, {4, 6}});
  AccReport other;
  other.add(3, 2, {1, 1});
  r.merge(other);
  CHECK(r.cells().at({3, 2}).total == 5);
}

TEST_CASE("pool sweep ordering and improvement flags") {
  const BackbonePool full(kAllBackbones.begin(), kAllBackbones.end());
  const auto subsets = all_subsets(full);
  CHECK(subsets.size() == 31);
  for (std::size_t i = 1; i < subsets.size(); ++i) CHECK(subsets[i - 1].size() <= subsets[i].size());

  // accuracy = 0.1 * |subset| + small per-kind bump; pairs improve over their members
  std::vector<BackbonePool> calls;
  auto runner = [&](const BackbonePool& pool) {
    calls.push_back(pool);
    double acc = 0.1 * static_cast<double>(pool.size());
    if (pool == BackbonePool{BackboneKind::GAT}) acc = 0.95;
    return std::map<int, double>{{2, acc}, {5, acc / 2}};
  };
  const std::vector<BackbonePool> asked = {{BackboneKind::SGC, BackboneKind::MLP},
                                           {BackboneKind::GAT, BackboneKind::MLP},
                                           {BackboneKind::MLP}};
  const auto rows = pool_sweep(asked, runner);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].subset == BackbonePool{BackboneKind::MLP});
  CHECK_FALSE(rows[0].improved);
  CHECK(rows[1].subset == BackbonePool{BackboneKind::MLP, BackboneKind::GAT});
  CHECK_FALSE(rows[1].improved);
  CHECK(rows[2].subset == BackbonePool{BackboneKind::MLP, BackboneKind::SGC});
  CHECK(rows[2].improved);
  // every pool evaluated once
  std::set<BackbonePool> distinct(calls.begin(), calls.end());
  CHECK(distinct.size() == calls.size());
  CHECK_THROWS(pool_sweep(std::vector<BackbonePool>{{}}, runner));
}

TEST_CASE("gain vs n") {
  const std::vector<std::size_t> ns = {1, 3, 5};
  const auto curve = gain_vs_n(ns, [](std::size_t n) {
    const double bump = n == 1 ? 0.0 : 0.01 * static_cast<double>(n);
    return std::pair{std::map<int, double>{{2, 0.6 + bump}, {3, 0.5 + bump}},
                     std::map<int, double>{{2, 0.6}, {3, 0.5}}};
  });
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].mean_gain == 0.0);
  CHECK(curve[1].mean_gain == doctest::Approx(0.03));
  CHECK(curve[2].mean_gain == doctest::Approx(0.05));
  const std::vector<std::size_t> zero = {0};
  CHECK_THROWS(gain_vs_n(zero, [](std::size_t) {
    return std::pair{std::map<int, double>{}, std::map<int, double>{}};
  }));
}

}  // TEST_SUITE
