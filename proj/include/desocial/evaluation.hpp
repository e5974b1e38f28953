#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "desocial/consensus.hpp"
#include "desocial/graph_store.hpp"
#include "desocial/query.hpp"
#include "desocial/rng.hpp"
#include "desocial/scoring.hpp"

namespace desocial {

struct QuerySet {
  Period period = 0;
  std::vector<EvalQuery> queries;
  /// Test edges dropped because max(K)-1 negatives could not be drawn.
  std::size_t skipped = 0;
};

/// One query per deduplicated test edge with max(Ks)-1 nested negatives that
/// avoid N(p), p and q in `view`.
QuerySet build_queries(const Snapshot& test, const CumulativeView& view, std::span<const int> ks,
                       Rng& rng);

/// Correct / total counts behind one accuracy value.
struct AccCell {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

class AccReport {
 public:
  void add(Period period, int k, AccCell cell);
  void merge(const AccReport& other);

  /// (period, K) -> accuracy.
  std::map<std::pair<Period, int>, double> per_period() const;
  /// K -> mean over periods weighted by query count.
  std::map<int, double> overall() const;
  /// period -> query count (taken from the smallest K recorded).
  std::map<Period, std::size_t> query_count() const;
  const std::map<std::pair<Period, int>, AccCell>& cells() const { return cells_; }

 private:
  std::map<std::pair<Period, int>, AccCell> cells_;
};

/// Single-model Acc@K: positive strictly above the first K-1 negatives.
AccCell acc_single(const PairScorer& scorer, std::span<const EvalQuery> queries, int k);

/// Consensus Acc@K: share of K-results whose majority decision is true.
/// Throws if the results do not cover exactly `expected_queries` queries.
AccCell acc_consensus(std::span<const VerificationResult> results, int k,
                      std::optional<std::size_t> expected_queries = std::nullopt);

struct QuartileAgreement {
  std::size_t accepted = 0;
  std::size_t unanimous = 0;
  /// Absent when no query in the quartile was accepted.
  std::optional<double> proportion() const {
    if (accepted == 0) return std::nullopt;
    return static_cast<double>(unanimous) / static_cast<double>(accepted);
  }
};

struct AgreementReport {
  std::array<QuartileAgreement, 4> per_quartile;
  void merge(const AgreementReport& other);
};

/// Share of accepted K=k results with unanimous votes, by requester quartile.
AgreementReport full_agreement_by_quartile(std::span<const VerificationResult> results,
                                           const std::array<std::vector<UserId>, 4>& quartiles,
                                           int k = 2);

struct PoolSweepRow {
  BackbonePool subset;
  std::map<int, double> accuracy;
  /// Primary-K accuracy beats every singleton member's.
  bool improved = false;
};

using PoolRunner = std::function<std::map<int, double>(const BackbonePool&)>;

/// Evaluates every subset (and the singletons it needs for comparison).
/// Rows are ordered by subset size, then canonical order, so subsets precede
/// their supersets.
std::vector<PoolSweepRow> pool_sweep(std::span<const BackbonePool> subsets, const PoolRunner& run,
                                     int primary_k = 2);

/// All non-empty subsets of `pool`, each in canonical order.
std::vector<BackbonePool> all_subsets(const BackbonePool& pool);

struct GainPoint {
  std::size_t n = 0;
  std::map<int, double> consensus;
  std::map<int, double> single;
  /// Mean over K of consensus - single.
  double mean_gain = 0.0;
};

/// Runner returns (consensus accuracy by K, single-validator accuracy by K).
using GainRunner =
    std::function<std::pair<std::map<int, double>, std::map<int, double>>(std::size_t n)>;

std::vector<GainPoint> gain_vs_n(std::span<const std::size_t> n_values, const GainRunner& run);

}  // namespace desocial
