#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "desocial/query.hpp"
#include "desocial/rng.hpp"
#include "desocial/scoring.hpp"
#include "desocial/selection.hpp"

namespace desocial {

struct Committee {
  UserId requester = 0;
  Period period = 0;
  BackboneKind backbone = BackboneKind::MLP;
  std::vector<UserId> validators;
};

/// Uniform sample without replacement of min(n, |pool|) users holding the
/// requester's backbone, excluding the requester.
/// Throws Error("no validators for backbone") when that pool is empty.
Committee sample_committee(const AlgorithmAssignment& assignment, UserId requester, std::size_t n,
                           Period period, Rng& rng);

/// One committee per requester, each drawn from its own (seed, requester,
/// period) stream so the result does not depend on iteration order.
std::map<UserId, Committee> form_committees(const AlgorithmAssignment& assignment,
                                            std::span<const UserId> requesters, std::size_t n,
                                            Period period, std::uint64_t seed);

struct VoteContext {
  EdgePair positive;
  std::vector<UserId> negatives;
  Period period = 0;
};

/// True iff score(p, q) strictly exceeds the score of every negative.
bool cast_vote(const PairScorer& scorer, const VoteContext& context);

struct Verdict {
  bool decision = false;
  std::size_t agree_count = 0;
};

/// Majority rule: accept iff agree_count > floor(|votes| / 2).
Verdict verify(const std::vector<bool>& votes);

struct VerificationResult {
  VoteContext context;
  UserId requester = 0;
  std::vector<UserId> validators;
  std::vector<bool> votes;
  bool decision = false;
  std::size_t agree_count = 0;
  int k = 2;
  std::size_t query_index = 0;
  std::size_t request_batch = 0;
  std::size_t vote_batch = 0;
};

template <class T>
std::vector<std::vector<T>> batch_requests(std::span<const T> items, std::size_t batch_size) {
  if (batch_size == 0) throw Error("batch size must be >= 1");
  std::vector<std::vector<T>> batches;
  for (std::size_t i = 0; i < items.size(); i += batch_size) {
    const auto end = std::min(items.size(), i + batch_size);
    batches.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                         items.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

using ScorerLookup = std::function<const PairScorer&(UserId validator)>;

struct VotingConfig {
  std::vector<int> ks = {2, 3, 5};
  std::size_t request_batch = 32;
  std::size_t vote_batch = 256;
  /// Each validator draws its own negatives instead of sharing the query's.
  bool per_validator_negatives = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct PeriodOutcome {
  /// Ordered by query index, then by K ascending.
  std::vector<VerificationResult> results;
  /// Union of all committees, ascending.
  std::vector<UserId> validator_set;
};

/// Collects every committee member's vote on every query and aggregates them
/// by majority. `view` is only consulted for per-validator negatives.
PeriodOutcome run_period(std::span<const EvalQuery> queries,
                         const std::map<UserId, Committee>& committees, const ScorerLookup& scorer_of,
                         const VotingConfig& config, const CumulativeView* view = nullptr);

/// Union of committee members, ascending.
std::vector<UserId> validator_set(const std::map<UserId, Committee>& committees);

/// Newline-delimited JSON, one record per result.
void write_verification_log(std::span<const VerificationResult> results, std::ostream& out);

}  // namespace desocial
