#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "desocial/graph_store.hpp"
#include "desocial/rng.hpp"
#include "desocial/scoring.hpp"

namespace desocial {

struct SamplePair {
  UserId positive = 0;  // historical neighbor v_p
  UserId negative = 0;  // historical non-neighbor v_n
  double weight = 1.0;  // exp(alpha * (t - t_e))
  Period emerged = 0;   // t_e of (u, v_p)
};

struct PairSample {
  UserId owner = 0;
  Period period = 0;
  std::vector<SamplePair> pairs;
};

/// Draws `gamma` (neighbor, non-neighbor) pairs for `u` at the view's period.
/// Positives are uniform with replacement over N(u); each pair gets a fresh
/// negative. Throws Error("no positive neighbors") for isolated users.
PairSample sample_pair_set(UserId u, const CumulativeView& view, const SnapshotSequence& seq,
                           std::size_t gamma, double alpha, Rng& rng);

/// One candidate per backbone in the pool.
using CandidateScorers = std::vector<std::pair<BackboneKind, const PairScorer*>>;

/// Time-decay-weighted count of pairs the scorer orders correctly (strict >).
double selection_score(const PairSample& sample, const PairScorer& scorer);

/// Argmax of selection_score over the candidates; ties go to the earliest kind
/// in canonical order (MLP, GCN, GAT, SAGE, SGC).
BackboneKind select_algorithm(const PairSample& sample, const CandidateScorers& candidates);

/// Degree / clustering rule table; the first matching branch wins, otherwise
/// the last backbone in the pool.
BackboneKind rule_based_select(const NodeStats& stats, const BackbonePool& pool);

enum class SelectionStrategy { Personalized, Rule, Random, Fixed };

struct StrategySpec {
  SelectionStrategy kind = SelectionStrategy::Personalized;
  BackboneKind fixed = BackboneKind::SGC;  // only for Fixed

  static StrategySpec fixed_to(BackboneKind kind) { return {SelectionStrategy::Fixed, kind}; }
};

std::string to_string(const StrategySpec& spec);
StrategySpec parse_strategy(std::string_view text);

class AlgorithmAssignment {
 public:
  AlgorithmAssignment() = default;
  explicit AlgorithmAssignment(StrategySpec strategy) : strategy_(strategy) {}

  void assign(UserId user, BackboneKind kind);

  const StrategySpec& strategy() const { return strategy_; }
  const std::map<UserId, BackboneKind>& choices() const { return choices_; }
  /// Users holding `kind`, ascending.
  const std::vector<UserId>& users_of(BackboneKind kind) const;
  BackboneKind choice_of(UserId user) const;
  bool contains(UserId user) const { return choices_.count(user) != 0; }

 private:
  StrategySpec strategy_;
  std::map<UserId, BackboneKind> choices_;
  std::map<BackboneKind, std::vector<UserId>> by_backbone_;
};

struct SelectionContext {
  BackbonePool pool;
  const CumulativeView* view = nullptr;
  const SnapshotSequence* seq = nullptr;
  std::size_t gamma = 500;
  double alpha = -0.1;
  std::uint64_t seed = 0;
  /// Period used to derive per-user random streams.
  Period period = 0;
  /// Required for the personalized strategy.
  CandidateScorers candidates;
};

/// Applies the strategy to every requester. Personalized selection falls back
/// to the rule table for users without a usable pair sample.
AlgorithmAssignment assign_all(const StrategySpec& strategy, std::span<const UserId> requesters,
                               const SelectionContext& context);

/// `user,backbone` rows in ascending user order.
void write_assignment_csv(const AlgorithmAssignment& assignment, std::ostream& out);

}  // namespace desocial
