#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "desocial/graph_store.hpp"

namespace desocial::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Incoming-neighbor lists (including a self loop per node) for attention.
struct AttentionGraph {
  std::vector<std::size_t> offsets;
  std::vector<UserId> sources;
};

struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape over dense row-major matrices. Operands referenced by
/// pointer (sparse matrices, graphs) must outlive the tape.
class Tape {
 public:
  Var constant(Matrix value);
  /// Leaf whose gradient is read back after backward().
  Var parameter(const Matrix& value);

  Var matmul(Var a, Var b);
  Var spmm(const SparseMatrix& a, Var x);
  Var add(Var a, Var b);
  Var add_row_bias(Var x, Var bias);
  Var scale(Var x, double factor);
  Var relu(Var x);
  /// Elementwise product with a fixed mask (inverted dropout).
  Var mask(Var x, Matrix mask);
  /// One GATv2 head: out_i = sum_j softmax_j(a . lrelu(src_j + dst_i)) src_j.
  Var attention_head(Var src, Var dst, Var att, const AttentionGraph& graph, double slope);
  /// Row-wise dot products z_p . z_q for each pair; shape (pairs x 1).
  Var pair_logits(Var z, std::span<const EdgePair> pairs);
  /// Mean binary cross-entropy of logistic(logits) against labels; shape 1x1.
  Var bce_with_logits(Var logits, std::span<const double> labels);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() target; zero matrix if unreached.
  Matrix grad(Var v) const;
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, std::size_t)> backprop;
  };

  Var push(Matrix value, std::function<void(Tape&, std::size_t)> backprop);
  void accumulate(std::size_t id, const Matrix& delta);
  template <class Expr>
  void accumulate_expr(std::size_t id, const Expr& delta);

  std::vector<Node> nodes_;
};

}  // namespace desocial::ad
