#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "desocial/consensus.hpp"
#include "desocial/graph_store.hpp"
#include "desocial/harness.hpp"
#include "desocial/rng.hpp"
#include "desocial/scoring.hpp"

namespace testing {

using namespace desocial;

/// Hand-set score table; unknown pairs score `fallback`.
class TableScorer : public PairScorer {
 public:
  explicit TableScorer(double fallback = 0.0) : fallback_(fallback) {}
  void set(UserId p, UserId q, double s) { table_[{p, q}] = s; }
  double score(UserId p, UserId q) const override {
    auto it = table_.find({p, q});
    return it == table_.end() ? fallback_ : it->second;
  }

 private:
  double fallback_;
  std::map<std::pair<UserId, UserId>, double> table_;
};

/// Independent uniform score per ordered pair, fixed by the seed.
class HashScorer : public PairScorer {
 public:
  explicit HashScorer(std::uint64_t seed) : seed_(seed) {}
  double score(UserId p, UserId q) const override {
    const auto h = splitmix64(seed_ ^ splitmix64((static_cast<std::uint64_t>(p) << 32) | q));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_;
};

/// A validator that ranks the requester's true target first with probability
/// theta, independently per (validator, requester).
class CoinValidator : public PairScorer {
 public:
  CoinValidator(std::uint64_t seed, UserId id, double theta, const std::vector<UserId>* truth)
      : seed_(seed), id_(id), theta_(theta), truth_(truth) {}

  double score(UserId p, UserId q) const override {
    if (q != (*truth_)[p]) return 0.5;
    Rng rng = make_stream(seed_, StreamTag::Synthetic, id_, p);
    return uniform01(rng) < theta_ ? 1.0 : 0.0;
  }

 private:
  std::uint64_t seed_;
  UserId id_;
  double theta_;
  const std::vector<UserId>* truth_;
};

inline double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) * std::pow(p, k) *
         std::pow(1.0 - p, n - k);
}

/// P(more than floor(n/2) of n independent theta-coins come up true).
inline double majority_probability(int n, double theta) {
  double total = 0.0;
  for (int k = n / 2 + 1; k <= n; ++k) total += binomial_pmf(n, k, theta);
  return total;
}

/// Random undirected graph with edge probability p.
inline std::vector<EdgePair> random_graph(std::size_t n, double p, Rng& rng) {
  std::vector<EdgePair> edges;
  for (UserId a = 0; a < n; ++a) {
    for (UserId b = a + 1; b < n; ++b) {
      if (uniform01(rng) < p) edges.emplace_back(a, b);
    }
  }
  return edges;
}

/// Synthetic consensus fixture: `queries` requesters, each with one query
/// whose target sits at id `queries` and negatives above it; every user holds
/// the same backbone and validates with a CoinValidator.
struct CoinFixture {
  std::vector<UserId> truth;
  std::vector<CoinValidator> validators;
  std::vector<EvalQuery> queries;
  std::vector<UserId> requesters;
  AlgorithmAssignment assignment{StrategySpec::fixed_to(BackboneKind::MLP)};

  CoinFixture(std::size_t count, double theta, std::uint64_t seed, int max_k = 5) {
    const auto target = static_cast<UserId>(count);
    truth.assign(count, target);
    for (UserId u = 0; u < count; ++u) {
      validators.emplace_back(seed, u, theta, &truth);
      assignment.assign(u, BackboneKind::MLP);
      requesters.push_back(u);
      EvalQuery q;
      q.positive = {u, target};
      for (int j = 1; j < max_k; ++j) q.negatives.push_back(target + static_cast<UserId>(j));
      q.period = 1;
      q.index = u;
      queries.push_back(q);
    }
  }

  PeriodOutcome vote(std::size_t n, std::uint64_t seed, std::vector<int> ks = {2}) const {
    const auto committees = form_committees(assignment, requesters, n, 1, seed);
    VotingConfig config;
    config.ks = std::move(ks);
    config.seed = seed;
    return run_period(queries, committees,
                      [this](UserId v) -> const PairScorer& { return validators.at(v); }, config);
  }
};

/// A configuration small enough to run the whole pipeline in a few seconds.
inline ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.slices = 6;
  c.start_test_period = 4;
  c.end_test_period = 5;
  c.synthetic.num_users = 40;
  c.synthetic.num_edges = 900;
  c.synthetic.slices = 6;
  c.synthetic.communities = 2;
  c.pool = {BackboneKind::MLP, BackboneKind::GCN, BackboneKind::SGC};
  c.committee_size = 3;
  c.gamma = 40;
  c.hyper.embed_dim = 8;
  c.hyper.epochs = 15;
  c.hyper.learning_rate = 0.05;
  c.hyper.patience = 5;
  c.seeds = {1};
  c.verification_log = true;
  return c;
}

}  // namespace testing
