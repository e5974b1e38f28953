#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "desocial/config.hpp"
#include "desocial/consensus.hpp"
#include "desocial/evaluation.hpp"
#include "desocial/graph_store.hpp"

namespace desocial {

/// The dataset an experiment runs on, already cut into snapshots.
struct Dataset {
  SnapshotSequence sequence;
  /// Original tokens by dense id; empty for synthetic data.
  std::vector<std::string> tokens;
};

Dataset load_dataset(const ExperimentConfig& config);

/// One decision procedure evaluated on the shared query sets.
struct MethodSpec {
  std::string name;
  StrategySpec strategy;
  BackbonePool pool;
  std::size_t committee_size = 1;
};

/// Ablation variants of the full pipeline.
enum class Variant { Single, NoPersonalized, RandomSelect, SimpleSelect, NoConsensus };

std::optional<Variant> parse_variant(std::string_view text);
std::string_view to_string(Variant variant);

/// `backbone` is required for Single and NoPersonalized.
MethodSpec variant_method(const ExperimentConfig& config, Variant variant,
                          std::optional<BackboneKind> backbone = std::nullopt);

/// The configured pipeline (strategy, pool, n).
MethodSpec full_method(const ExperimentConfig& config);

/// Full pipeline, no_consensus, and fixed/single runs for every pool member.
std::vector<MethodSpec> standard_methods(const ExperimentConfig& config);

/// Emitted once per parameter update run; lets tests audit what trained on what.
struct TrainingEvent {
  std::uint64_t seed = 0;
  Period test_period = 0;
  BackboneKind kind = BackboneKind::MLP;
  /// Validator id, or the replica index when replicas are enabled.
  UserId owner = 0;
  /// Canonical selection scorers are not validators.
  bool canonical = false;
  Period message_upto = 0;
  Period supervision_period = 0;
};

struct HarnessHooks {
  std::function<void(const TrainingEvent&)> on_train;
};

struct PeriodRecord {
  Period period = 0;
  std::size_t queries = 0;
  std::size_t skipped = 0;
  /// Requesters whose backbone had no other holder and who validated alone.
  std::map<std::string, std::size_t> self_validation;
  /// Union of committees over all methods.
  std::vector<UserId> validator_set;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, AccReport> accuracy;
  /// Agreement of the first method, K=2.
  AgreementReport agreement;
  std::vector<PeriodRecord> periods;
  /// Verification results of the first method.
  std::vector<VerificationResult> verification;
  /// Assignment of the first method per test period.
  std::map<Period, AlgorithmAssignment> assignments;
  /// Hyperparameters chosen by the optional search.
  std::map<BackboneKind, TrainingHyper> searched;
};

struct RunBundle {
  ExperimentConfig config;
  std::vector<MethodSpec> methods;
  std::vector<SeedResult> seeds;
  std::vector<PoolSweepRow> pool_sweep;
  std::vector<GainPoint> gain;
  double seconds = 0.0;
};

/// Runs every method over every seed and test period. Methods share queries,
/// committees (when their assignments agree) and trained validator scorers.
RunBundle run_methods(const ExperimentConfig& config, const Dataset& data,
                      const std::vector<MethodSpec>& methods, const HarnessHooks& hooks = {});

RunBundle run_experiment(const ExperimentConfig& config, const Dataset& data,
                         const HarnessHooks& hooks = {});

/// The full pipeline next to one ablation variant.
RunBundle run_ablation(const ExperimentConfig& config, const Dataset& data, Variant variant,
                       std::optional<BackboneKind> backbone = std::nullopt);

/// Personalized pipeline over every non-empty subset of the configured pool.
RunBundle run_pool_sweep(const ExperimentConfig& config, const Dataset& data);

/// Consensus gain over the single-validator baseline for each committee size.
RunBundle run_gain_vs_n(const ExperimentConfig& config, const Dataset& data,
                        const std::vector<std::size_t>& n_values);

/// Seed-averaged overall Acc@K of one method.
std::map<int, double> mean_accuracy(const RunBundle& bundle, const std::string& method);

}  // namespace desocial
