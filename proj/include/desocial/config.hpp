#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "desocial/backbones.hpp"
#include "desocial/graph_store.hpp"
#include "desocial/selection.hpp"

namespace desocial {

struct ExperimentConfig {
  /// Edge-list path, or "synthetic" to generate from `synthetic`.
  std::string dataset = "synthetic";
  SyntheticSpec synthetic;
  int slices = 40;
  int start_test_period = 30;
  int end_test_period = 39;
  BackbonePool pool = {kAllBackbones.begin(), kAllBackbones.end()};
  StrategySpec strategy;
  std::size_t committee_size = 5;
  std::vector<int> ks = {2, 3, 5};
  std::size_t gamma = 500;
  double alpha = -0.1;
  std::size_t request_batch = 32;
  std::size_t vote_batch = 256;
  TrainingHyper hyper;
  /// Per-backbone overrides applied on top of `hyper`.
  std::map<BackboneKind, double> learning_rate_by_kind;
  std::map<BackboneKind, double> dropout_by_kind;
  bool hyper_search = false;
  std::vector<double> search_learning_rates = {1e-1, 5e-2, 1e-2, 5e-3, 1e-3};
  std::vector<double> search_dropouts = {0.3, 0.5, 0.7};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string output_dir = "desocial_out";
  bool per_validator_negatives = false;
  /// 0 trains one scorer per validator; R > 0 trains R shared replicas per
  /// backbone and maps each validator onto one of them.
  std::size_t validator_replicas = 0;
  bool verification_log = true;
  std::size_t threads = 1;

  TrainingHyper hyper_for(BackboneKind kind) const;
  /// Throws Error naming the first violated field.
  void validate() const;
};

/// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Applies DESOCIAL_SEED and DESOCIAL_THREADS when set.
void apply_environment(ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);

/// Parses `1,3,5` style lists.
std::vector<std::size_t> parse_size_list(std::string_view text);

/// Key-value synthetic dataset description used by `synth`.
SyntheticSpec parse_synthetic_spec(std::istream& in);

}  // namespace desocial
