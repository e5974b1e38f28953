#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "desocial/autodiff.hpp"
#include "desocial/graph_store.hpp"
#include "desocial/rng.hpp"
#include "desocial/scoring.hpp"

namespace desocial {

using Matrix = ad::Matrix;

enum class Optimizer { GradientDescent, Adam };

struct TrainingHyper {
  double learning_rate = 0.01;
  double dropout = 0.3;
  int epochs = 100;
  int patience = 20;
  int embed_dim = 64;
  int neg_ratio = 1;
  int heads = 4;
  int hops = 2;
  Optimizer optimizer = Optimizer::Adam;
  /// Share of supervision edges held out for early stopping.
  double validation_fraction = 0.1;

  void validate() const;
};

/// Normalized propagation matrices and attention lists for one message graph.
/// Immutable; shared by every scorer that encodes over the same view.
class GraphOperators {
 public:
  explicit GraphOperators(const CumulativeView& view);

  const CumulativeView& view() const { return *view_; }
  std::size_t num_users() const { return view_->num_users(); }
  /// D~^{-1/2} (A + I) D~^{-1/2}
  const ad::SparseMatrix& normalized_adjacency() const { return normalized_; }
  /// Row-normalized A; isolated rows are zero.
  const ad::SparseMatrix& mean_aggregator() const { return mean_; }
  const ad::AttentionGraph& attention_graph() const { return attention_; }

 private:
  const CumulativeView* view_;
  ad::SparseMatrix normalized_;
  ad::SparseMatrix mean_;
  ad::AttentionGraph attention_;
};

/// A validator's link scorer: learnable node embeddings plus the layer weights
/// of one backbone architecture, decoded by logistic(z_p . z_q).
class LinkScorer : public PairScorer {
 public:
  LinkScorer() = default;

  static LinkScorer init(BackboneKind kind, std::size_t num_users, const TrainingHyper& hyper,
                         std::uint64_t seed, UserId owner = 0);

  BackboneKind kind() const { return kind_; }
  UserId owner() const { return owner_; }
  std::uint64_t seed() const { return seed_; }
  const TrainingHyper& hyper() const { return hyper_; }
  std::size_t num_users() const { return num_users_; }

  /// Tensor 0 is the node embedding matrix; the rest depend on the kind.
  const std::vector<Matrix>& parameters() const { return params_; }
  std::vector<Matrix>& mutable_parameters() { return params_; }

  /// Inference-mode forward pass (no dropout).
  Matrix encode(const GraphOperators& ops) const;
  /// Encodes over `ops` and caches the output for score().
  void bind(const GraphOperators& ops);
  bool bound() const { return output_.size() != 0; }
  const Matrix& output() const { return output_; }

  double score(UserId p, UserId q) const override;

  void save(std::ostream& out) const;
  static LinkScorer load(std::istream& in);

 private:
  BackboneKind kind_ = BackboneKind::MLP;
  UserId owner_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t num_users_ = 0;
  TrainingHyper hyper_;
  std::vector<Matrix> params_;
  Matrix output_;
};

double logistic(double x);

/// logistic(z_p . z_q) over an explicit output matrix.
double dot_score(const Matrix& z, UserId p, UserId q);

/// Builds the backbone's forward graph on `tape`. Returns the output node and
/// fills `param_vars` with one leaf per parameter tensor. With `dropout_rng`
/// null, no dropout is applied.
ad::Var build_forward(const LinkScorer& scorer, const GraphOperators& ops, ad::Tape& tape,
                      std::vector<ad::Var>& param_vars, Rng* dropout_rng);

struct LossAndGradients {
  double loss = 0.0;
  std::vector<Matrix> gradients;
};

/// Mean BCE over labelled pairs and its exact gradient w.r.t. every tensor.
LossAndGradients loss_and_gradients(const LinkScorer& scorer, const GraphOperators& ops,
                                    std::span<const EdgePair> pairs,
                                    std::span<const double> labels, Rng* dropout_rng = nullptr);

struct ValidationSet {
  std::vector<EdgePair> positives;
  /// negatives[i] pairs with positives[i].first.
  std::vector<UserId> negatives;
};

struct SupervisionSplit {
  std::vector<EdgePair> train;
  ValidationSet validation;
};

/// Holds out `fraction` of the supervision edges (at least one when there are
/// two or more) with one sampled negative each.
SupervisionSplit split_supervision(std::span<const EdgePair> supervision, double fraction,
                                   const CumulativeView& message_view, Rng& rng);

/// Fraction of validation pairs whose positive strictly outscores its negative.
double validation_accuracy(const Matrix& z, const ValidationSet& validation);

struct TrainReport {
  std::vector<double> loss;
  std::vector<double> validation;
  int best_epoch = 0;
  int epochs_run = 0;
};

/// Full-batch training on `train` positives plus resampled negatives, with
/// early stopping on validation Acc@2. The scorer is left holding the best
/// validation parameters; call bind() before scoring.
TrainReport train_scorer(LinkScorer& scorer, const GraphOperators& message_ops,
                         std::span<const EdgePair> train, const ValidationSet& validation, Rng& rng);

}  // namespace desocial
