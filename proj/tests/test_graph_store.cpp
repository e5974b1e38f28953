#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "desocial/graph_store.hpp"
#include "support.hpp"

using namespace desocial;

TEST_SUITE("graph_store") {

TEST_CASE("ingest remaps tokens and drops self-loops") {
  std::istringstream in("a b 5\nb c 6\na a 7\n");
  const auto r = ingest_edge_list(in);
  REQUIRE(r.edges.size() == 2);
  CHECK(r.tokens == std::vector<std::string>{"a", "b", "c"});
  CHECK(r.self_loops_dropped == 1);
  CHECK(r.edges[0].src == 0);
  CHECK(r.edges[0].dst == 1);
  CHECK(r.edges[1].src == 1);
  CHECK(r.edges[1].dst == 2);
}

TEST_CASE("ingest keeps file order for equal timestamps") {
  std::istringstream in("# header\nx y 3\n\ny z 1,\nz x 3\nx,z,1\n");
  const auto r = ingest_edge_list(in);
  REQUIRE(r.edges.size() == 4);
  CHECK(r.edges[0].timestamp == 1);
  CHECK(r.edges[0].ingest_index < r.edges[1].ingest_index);
  CHECK(r.edges[2].timestamp == 3);
  CHECK(r.edges[2].src == 0);  // x y 3 came first in the file
  CHECK(r.edges[3].src == 2);
}

TEST_CASE("ingest errors") {
  std::istringstream empty("# nothing\n\n");
  CHECK_THROWS_WITH(ingest_edge_list(empty), "no edges");
  std::istringstream bad("a b 1\na b\n");
  CHECK_THROWS_WITH(ingest_edge_list(bad), doctest::Contains("line 2"));
  std::istringstream bad_time("a b later\n");
  CHECK_THROWS_WITH(ingest_edge_list(bad_time), doctest::Contains("line 1"));
}

TEST_CASE("partition sizes") {
  auto edges_of = [](std::size_t m) {
    std::vector<TimestampedEdge> e;
    for (std::size_t i = 0; i < m; ++i) e.push_back({0, 1, static_cast<std::int64_t>(i), i});
    return e;
  };
  const auto e100 = edges_of(100);
  const auto s100 = partition_slices(e100, 4, 2);
  REQUIRE(s100.size() == 4);
  for (const auto& s : s100.snapshots()) CHECK(s.raw_edge_count == 25);

  const auto e10 = edges_of(10);
  const auto s10 = partition_slices(e10, 3, 2);
  CHECK(s10.at(0).raw_edge_count == 4);
  CHECK(s10.at(1).raw_edge_count == 3);
  CHECK(s10.at(2).raw_edge_count == 3);

  CHECK_THROWS_WITH(partition_slices(e10, 11, 2), "too many slices");
  CHECK_THROWS(partition_slices(e10, 1, 2));
  CHECK_THROWS(s10.at(3));
}

TEST_CASE("slicing conserves edges and dedups within a slice") {
  SyntheticSpec spec;
  spec.num_users = 30;
  spec.num_edges = 997;
  spec.slices = 7;
  const auto edges = generate_synthetic_edges(spec);
  const auto seq = partition_slices(edges, 7, 30);
  std::size_t total = 0;
  std::size_t lo = edges.size();
  std::size_t hi = 0;
  for (const auto& s : seq.snapshots()) {
    total += s.raw_edge_count;
    lo = std::min(lo, s.raw_edge_count);
    hi = std::max(hi, s.raw_edge_count);
    CHECK(std::is_sorted(s.edges.begin(), s.edges.end()));
    CHECK(std::adjacent_find(s.edges.begin(), s.edges.end()) == s.edges.end());
    std::set<UserId> touched;
    for (auto [a, b] : s.edges) {
      touched.insert(a);
      touched.insert(b);
    }
    CHECK(std::vector<UserId>(touched.begin(), touched.end()) == s.users);
  }
  CHECK(total == edges.size());
  CHECK(hi - lo <= 1);
}

TEST_CASE("last_seen tracks the latest occurrence without looking ahead") {
  std::vector<TimestampedEdge> edges = {{3, 7, 0, 0}, {1, 2, 1, 1}, {7, 3, 2, 2}, {1, 4, 3, 3},
                                        {0, 5, 4, 4}, {2, 6, 5, 5}, {0, 1, 6, 6}, {3, 7, 7, 7}};
  const auto seq = partition_slices(edges, 4, 8);  // two edges per slice
  CHECK(seq.last_seen(3, 7) == 3);
  CHECK(seq.last_seen(7, 3, 2) == 1);
  CHECK(seq.last_seen(3, 7, 0) == 0);
  CHECK_FALSE(seq.last_seen(0, 7).has_value());
  CHECK_FALSE(seq.last_seen(0, 1, 2).has_value());
}

TEST_CASE("cumulative view equals brute-force union") {
  Rng rng(11);
  SyntheticSpec spec;
  spec.num_users = 25;
  spec.num_edges = 300;
  spec.slices = 3;
  spec.model = SyntheticModel::Uniform;
  const auto seq = generate_synthetic(spec);
  for (Period t = 0; t < 3; ++t) {
    std::set<std::pair<UserId, UserId>> oracle;
    for (Period s = 0; s <= t; ++s) {
      for (auto [a, b] : seq.at(s).edges) {
        oracle.insert({a, b});
        oracle.insert({b, a});
      }
    }
    const auto view = cumulative_view(seq, t);
    CHECK(view.num_edges() * 2 == oracle.size());
    for (UserId u = 0; u < 25; ++u) {
      std::vector<UserId> expect;
      for (const auto& [a, b] : oracle) {
        if (a == u) expect.push_back(b);
      }
      const auto got = view.neighbors(u);
      CHECK(std::vector<UserId>(got.begin(), got.end()) == expect);
      CHECK(view.degree(u) == expect.size());
    }
    if (t > 0) {
      const auto prev = cumulative_view(seq, t - 1);
      for (UserId u = 0; u < 25; ++u) {
        for (UserId v : prev.neighbors(u)) CHECK(view.has_edge(u, v));
      }
    }
  }
  CHECK_THROWS(cumulative_view(seq, 3));
}

TEST_CASE("repeated edge counted once") {
  const std::vector<EdgePair> pairs = {{3, 7}, {7, 3}, {3, 7}};
  CumulativeView view(8, pairs, 2);
  CHECK(view.num_edges() == 1);
  CHECK(view.degree(3) == 1);
  CHECK(view.has_edge(7, 3));
}

TEST_CASE("clustering special cases") {
  const std::vector<EdgePair> triangle = {{0, 1}, {1, 2}, {0, 2}};
  CumulativeView t(3, triangle);
  for (UserId u = 0; u < 3; ++u) CHECK(clustering_coefficient(t, u).clustering == 1.0);

  const std::vector<EdgePair> star = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  CumulativeView s(5, star);
  CHECK(clustering_coefficient(s, 0).clustering == 0.0);
  CHECK(clustering_coefficient(s, 0).degree == 4);
  CHECK(clustering_coefficient(s, 1).clustering == 0.0);

  CumulativeView isolated(4, std::vector<EdgePair>{{0, 1}});
  CHECK(clustering_coefficient(isolated, 3).degree == 0);
  CHECK(clustering_coefficient(isolated, 3).clustering == 0.0);
}

TEST_CASE("clustering matches neighbor-pair scan on a random graph") {
  Rng rng(5);
  const auto edges = testing::random_graph(30, 0.2, rng);
  CumulativeView view(30, edges);
  std::vector<std::vector<bool>> adj(30, std::vector<bool>(30, false));
  for (auto [a, b] : edges) adj[a][b] = adj[b][a] = true;
  for (UserId u = 0; u < 30; ++u) {
    std::vector<UserId> nbrs;
    for (UserId v = 0; v < 30; ++v) {
      if (adj[u][v]) nbrs.push_back(v);
    }
    std::size_t links = 0;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      for (std::size_t j = i + 1; j < nbrs.size(); ++j) links += adj[nbrs[i]][nbrs[j]] ? 1 : 0;
    }
    const double d = static_cast<double>(nbrs.size());
    const double expect = nbrs.size() <= 1 ? 0.0 : 2.0 * static_cast<double>(links) / (d * (d - 1.0));
    const auto stats = clustering_coefficient(view, u);
    CHECK(stats.clustering == doctest::Approx(expect).epsilon(1e-15));
    CHECK(stats.clustering >= 0.0);
    CHECK(stats.clustering <= 1.0);
  }
}

TEST_CASE("negative sampling validity and errors") {
  const std::vector<EdgePair> full = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  CumulativeView view(5, full);
  Rng rng(1);
  CHECK_THROWS_WITH(sample_negatives(view, 0, 1, {}, rng), "negative pool exhausted");

  const std::vector<EdgePair> almost = {{0, 1}, {0, 2}, {0, 3}};
  CumulativeView one_left(5, almost);
  CHECK(sample_negatives(one_left, 0, 1, {}, rng) == std::vector<UserId>{4});

  Rng g(9);
  const auto edges = testing::random_graph(60, 0.1, g);
  CumulativeView big(60, edges);
  for (int trial = 0; trial < 200; ++trial) {
    const auto src = static_cast<UserId>(uniform_below(g, 60));
    const UserId exclude[] = {static_cast<UserId>((src + 1) % 60)};
    const std::size_t eligible = 60 - big.degree(src) - 1 - (big.has_edge(src, exclude[0]) ? 0 : 1);
    const std::size_t k = std::min<std::size_t>(eligible, 1 + uniform_below(g, 6));
    const auto negs = sample_negatives(big, src, k, exclude, g);
    CHECK(negs.size() == k);
    std::set<UserId> distinct(negs.begin(), negs.end());
    CHECK(distinct.size() == k);
    for (UserId v : negs) {
      CHECK(v != src);
      CHECK(v != exclude[0]);
      CHECK_FALSE(big.has_edge(src, v));
    }
  }
}

TEST_CASE("negative sampling is uniform (chi-square)") {
  Rng g(21);
  const auto edges = testing::random_graph(100, 0.05, g);
  CumulativeView view(100, edges);
  const UserId src = 0;
  std::vector<double> counts(100, 0.0);
  Rng rng(77);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[sample_negatives(view, src, 1, {}, rng).front()] += 1;
  std::size_t eligible = 0;
  double chi2 = 0.0;
  for (UserId v = 0; v < 100; ++v) {
    if (v == src || view.has_edge(src, v)) {
      CHECK(counts[v] == 0.0);
      continue;
    }
    ++eligible;
  }
  const double expect = static_cast<double>(draws) / static_cast<double>(eligible);
  for (UserId v = 0; v < 100; ++v) {
    if (v == src || view.has_edge(src, v)) continue;
    chi2 += (counts[v] - expect) * (counts[v] - expect) / expect;
  }
  // 99.9% quantile of chi-square with ~95 degrees of freedom is about 145.
  const double dof = static_cast<double>(eligible - 1);
  CHECK(chi2 < dof + 4.5 * std::sqrt(2.0 * dof));
}

TEST_CASE("negative sampling determinism") {
  Rng g(3);
  CumulativeView view(50, testing::random_graph(50, 0.1, g));
  Rng a(8);
  Rng b(8);
  CHECK(sample_negatives(view, 4, 6, {}, a) == sample_negatives(view, 4, 6, {}, b));
}

TEST_CASE("quartile partition") {
  // path-like degrees: user i gets degree i+1 via a star fan
  std::vector<EdgePair> edges;
  UserId next = 8;
  for (UserId u = 0; u < 8; ++u) {
    for (UserId k = 0; k <= u; ++k) edges.emplace_back(u, next++);
  }
  CumulativeView view(next, edges);
  const std::vector<UserId> users = {7, 6, 5, 4, 3, 2, 1, 0};
  const auto q = quartile_partition(view, users);
  CHECK(q[0] == std::vector<UserId>{0, 1});
  CHECK(q[3] == std::vector<UserId>{6, 7});

  const std::vector<UserId> seven = {0, 1, 2, 3, 4, 5, 6};
  const auto q7 = quartile_partition(view, seven);
  CHECK(q7[0].size() == 2);
  CHECK(q7[1].size() == 2);
  CHECK(q7[2].size() == 2);
  CHECK(q7[3].size() == 1);

  CumulativeView flat(10, std::vector<EdgePair>{});
  const std::vector<UserId> all = {9, 3, 5, 1, 0, 2};
  const auto qf = quartile_partition(flat, all);
  CHECK(qf[0] == std::vector<UserId>{0, 1});
  CHECK(qf[1] == std::vector<UserId>{2, 3});
  CHECK(qf[2] == std::vector<UserId>{5});
  CHECK(qf[3] == std::vector<UserId>{9});

  const std::vector<UserId> three = {0, 1, 2};
  CHECK_THROWS(quartile_partition(flat, three));
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.num_users = 20;
  spec.num_edges = 100;
  spec.slices = 4;
  spec.model = SyntheticModel::Uniform;
  spec.seed = 7;
  const auto a = generate_synthetic_edges(spec);
  const auto b = generate_synthetic_edges(spec);
  CHECK(a == b);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].timestamp > a[i - 1].timestamp);

  SyntheticSpec tiny;
  tiny.num_users = 4;
  tiny.num_edges = 4;
  tiny.slices = 4;
  tiny.model = SyntheticModel::Uniform;
  const auto seq = generate_synthetic(tiny);
  for (const auto& s : seq.snapshots()) CHECK(s.raw_edge_count == 1);

  SyntheticSpec pref;
  pref.num_users = 200;
  pref.num_edges = 500;
  pref.slices = 5;
  pref.model = SyntheticModel::Preferential;
  const auto pseq = generate_synthetic(pref);
  const auto view = cumulative_view(pseq, 4);
  std::size_t max_degree = 0;
  std::size_t total = 0;
  std::size_t active = 0;
  for (UserId u = 0; u < 200; ++u) {
    max_degree = std::max(max_degree, view.degree(u));
    total += view.degree(u);
    active += view.degree(u) > 0 ? 1 : 0;
  }
  CHECK(static_cast<double>(max_degree) >= 2.0 * static_cast<double>(total) / static_cast<double>(active));

  SyntheticSpec bad = tiny;
  bad.num_users = 3;
  CHECK_THROWS(generate_synthetic(bad));
}

}  // TEST_SUITE
