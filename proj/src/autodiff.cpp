#include "desocial/autodiff.hpp"

#include <cmath>

namespace desocial::ad {

Var Tape::push(Matrix value, std::function<void(Tape&, std::size_t)> backprop) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop)});
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& delta) { accumulate_expr(id, delta); }

template <class Expr>
void Tape::accumulate_expr(std::size_t id, const Expr& delta) {
  auto& g = nodes_[id].grad;
  if (g.size() == 0) {
    g = delta;
  } else {
    g += delta;
  }
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[v.id];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::parameter(const Matrix& value) { return push(value, nullptr); }

Var Tape::matmul(Var a, Var b) {
  Matrix out = nodes_[a.id].value * nodes_[b.id].value;
  return push(std::move(out), [a, b](Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    tape.accumulate_expr(a.id, g * tape.nodes_[b.id].value.transpose());
    tape.accumulate_expr(b.id, tape.nodes_[a.id].value.transpose() * g);
  });
}

Var Tape::spmm(const SparseMatrix& a, Var x) {
  Matrix out = a * nodes_[x.id].value;
  const SparseMatrix* ap = &a;
  return push(std::move(out), [ap, x](Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    Matrix back = ap->transpose() * g;
    tape.accumulate(x.id, back);
  });
}

Var Tape::add(Var a, Var b) {
  Matrix out = nodes_[a.id].value + nodes_[b.id].value;
  return push(std::move(out), [a, b](Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    tape.accumulate(a.id, g);
    tape.accumulate(b.id, g);
  });
}

Var Tape::add_row_bias(Var x, Var bias) {
  Matrix out = nodes_[x.id].value;
  out.rowwise() += nodes_[bias.id].value.row(0);
  return push(std::move(out), [x, bias](Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    tape.accumulate(x.id, g);
    Matrix col_sum = g.colwise().sum();
    tape.accumulate(bias.id, col_sum);
  });
}

Var Tape::scale(Var x, double factor) {
  Matrix out = nodes_[x.id].value * factor;
  return push(std::move(out), [x, factor](Tape& tape, std::size_t self) {
    tape.accumulate_expr(x.id, tape.nodes_[self].grad * factor);
  });
}

Var Tape::relu(Var x) {
  Matrix out = nodes_[x.id].value.cwiseMax(0.0);
  return push(std::move(out), [x](Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    const Matrix& in = tape.nodes_[x.id].value;
    Matrix back = (in.array() > 0.0).select(g, 0.0);
    tape.accumulate(x.id, back);
  });
}

Var Tape::mask(Var x, Matrix mask) {
  Matrix out = nodes_[x.id].value.cwiseProduct(mask);
  return push(std::move(out), [x, m = std::move(mask)](Tape& tape, std::size_t self) {
    tape.accumulate_expr(x.id, tape.nodes_[self].grad.cwiseProduct(m));
  });
}

namespace {

using Array = Eigen::ArrayXd;
using Row = Eigen::Map<const Eigen::ArrayXd>;
using MutRow = Eigen::Map<Eigen::ArrayXd>;

}  // namespace

Var Tape::attention_head(Var src, Var dst, Var att, const AttentionGraph& graph, double slope) {
  const Matrix& xs = nodes_[src.id].value;
  const Matrix& xd = nodes_[dst.id].value;
  const Matrix& a = nodes_[att.id].value;  // 1 x d
  const auto n = static_cast<std::size_t>(xs.rows());
  const Eigen::Index d = xs.cols();
  const double* av = a.data();

  // Attention coefficients, one per incoming edge, kept for the backward pass.
  std::vector<double> alpha(graph.sources.size());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto begin = graph.offsets[i];
    const auto end = graph.offsets[i + 1];
    const double* di = xd.data() + static_cast<Eigen::Index>(i) * d;
    double max_e = -std::numeric_limits<double>::infinity();
    for (auto k = begin; k < end; ++k) {
      const double* sj = xs.data() + static_cast<Eigen::Index>(graph.sources[k]) * d;
      const auto v = Row(sj, d) + Row(di, d);
      const double e = (v.max(slope * v) * Row(av, d)).sum();
      alpha[k] = e;
      max_e = std::max(max_e, e);
    }
    double total = 0.0;
    for (auto k = begin; k < end; ++k) {
      alpha[k] = std::exp(alpha[k] - max_e);
      total += alpha[k];
    }
    double* oi = out.data() + static_cast<Eigen::Index>(i) * d;
    for (auto k = begin; k < end; ++k) {
      alpha[k] /= total;
      const double* sj = xs.data() + static_cast<Eigen::Index>(graph.sources[k]) * d;
      MutRow(oi, d) += alpha[k] * Row(sj, d);
    }
  }

  const AttentionGraph* gp = &graph;
  return push(std::move(out), [src, dst, att, gp, slope, alpha = std::move(alpha)](
                                  Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    const Matrix& xs = tape.nodes_[src.id].value;
    const Matrix& xd = tape.nodes_[dst.id].value;
    const double* av = tape.nodes_[att.id].value.data();
    const auto n = static_cast<std::size_t>(xs.rows());
    const Eigen::Index d = xs.cols();
    Matrix gs = Matrix::Zero(xs.rows(), d);
    Matrix gd = Matrix::Zero(xd.rows(), d);
    Matrix ga = Matrix::Zero(1, d);
    double* gav = ga.data();
    std::vector<double> dalpha;
    for (std::size_t i = 0; i < n; ++i) {
      const auto begin = gp->offsets[i];
      const auto end = gp->offsets[i + 1];
      const auto row = static_cast<Eigen::Index>(i);
      const double* gi = g.data() + row * d;
      const double* di = xd.data() + row * d;
      double* gdi = gd.data() + row * d;
      dalpha.assign(end - begin, 0.0);
      double weighted = 0.0;
      for (auto k = begin; k < end; ++k) {
        const auto j = static_cast<Eigen::Index>(gp->sources[k]);
        const double* sj = xs.data() + j * d;
        double* gsj = gs.data() + j * d;
        const double dot = (Row(gi, d) * Row(sj, d)).sum();
        MutRow(gsj, d) += alpha[k] * Row(gi, d);
        dalpha[k - begin] = dot;
        weighted += alpha[k] * dot;
      }
      for (auto k = begin; k < end; ++k) {
        const auto j = static_cast<Eigen::Index>(gp->sources[k]);
        const double de = alpha[k] * (dalpha[k - begin] - weighted);
        const double* sj = xs.data() + j * d;
        double* gsj = gs.data() + j * d;
        const auto v = (Row(sj, d) + Row(di, d)).eval();
        MutRow(gav, d) += de * v.max(slope * v);
        const auto ds = (de * Row(av, d) * (v > 0.0).select(1.0, Array::Constant(d, slope))).eval();
        MutRow(gsj, d) += ds;
        MutRow(gdi, d) += ds;
      }
    }
    tape.accumulate(src.id, gs);
    tape.accumulate(dst.id, gd);
    tape.accumulate(att.id, ga);
  });
}

Var Tape::pair_logits(Var z, std::span<const EdgePair> pairs) {
  const Matrix& zv = nodes_[z.id].value;
  Matrix out(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out(static_cast<Eigen::Index>(k), 0) = zv.row(pairs[k].first).dot(zv.row(pairs[k].second));
  }
  std::vector<EdgePair> kept(pairs.begin(), pairs.end());
  return push(std::move(out), [z, kept = std::move(kept)](Tape& tape, std::size_t self) {
    const Matrix& g = tape.nodes_[self].grad;
    const Matrix& zv = tape.nodes_[z.id].value;
    Matrix gz = Matrix::Zero(zv.rows(), zv.cols());
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const double gk = g(static_cast<Eigen::Index>(k), 0);
      const auto [p, q] = kept[k];
      gz.row(p) += gk * zv.row(q);
      gz.row(q) += gk * zv.row(p);
    }
    tape.accumulate(z.id, gz);
  });
}

Var Tape::bce_with_logits(Var logits, std::span<const double> labels) {
  const Matrix& x = nodes_[logits.id].value;
  if (static_cast<std::size_t>(x.rows()) != labels.size() || x.cols() != 1) {
    throw Error("label count does not match logits");
  }
  if (labels.empty()) throw Error("empty loss");
  double total = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double v = x(static_cast<Eigen::Index>(k), 0);
    const double softplus = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    total += softplus - labels[k] * v;
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(labels.size());
  std::vector<double> kept(labels.begin(), labels.end());
  return push(std::move(out), [logits, kept = std::move(kept)](Tape& tape, std::size_t self) {
    const double g = tape.nodes_[self].grad(0, 0);
    const Matrix& x = tape.nodes_[logits.id].value;
    const double inv = 1.0 / static_cast<double>(kept.size());
    Matrix back(x.rows(), 1);
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      const double sig = 1.0 / (1.0 + std::exp(-x(k, 0)));
      back(k, 0) = g * (sig - kept[static_cast<std::size_t>(k)]) * inv;
    }
    tape.accumulate(logits.id, back);
  });
}

void Tape::backward(Var loss) {
  for (auto& node : nodes_) node.grad.resize(0, 0);
  const auto& lv = nodes_[loss.id].value;
  nodes_[loss.id].grad = Matrix::Ones(lv.rows(), lv.cols());
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (node.backprop && node.grad.size() != 0) node.backprop(*this, id);
  }
}

}  // namespace desocial::ad
