#include "desocial/backbones.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace desocial {

namespace {

constexpr double kAttentionSlope = 0.2;

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
  }
  return m;
}

/// Number of tensors after the embedding matrix, and whether each is a bias.
std::vector<bool> layout(BackboneKind kind, int heads) {
  switch (kind) {
    case BackboneKind::MLP:
    case BackboneKind::GCN:
      return {false, true, false, true};
    case BackboneKind::SAGE:
      return {false, false, true, false, false, true};
    case BackboneKind::GAT: {
      std::vector<bool> out;
      for (int layer = 0; layer < 2; ++layer) {
        for (int h = 0; h < heads; ++h) {
          out.push_back(false);  // source transform
          out.push_back(false);  // target transform
          out.push_back(false);  // attention vector (1 x d)
        }
        out.push_back(true);
      }
      return out;
    }
    case BackboneKind::SGC:
      return {false, true, false, true, false, true};
  }
  throw Error("unsupported backbone kind");
}

bool is_attention_vector(BackboneKind kind, int heads, std::size_t index) {
  if (kind != BackboneKind::GAT) return false;
  const std::size_t per_layer = 3 * static_cast<std::size_t>(heads) + 1;
  const std::size_t pos = index % per_layer;
  return pos < 3 * static_cast<std::size_t>(heads) && pos % 3 == 2;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string("non-finite ") + what);
}

}  // namespace

void TrainingHyper::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must be in [0, 1)");
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (patience < 0 || patience > epochs) throw Error("patience must be in [0, epochs]");
  if (embed_dim < 1) throw Error("embed_dim must be >= 1");
  if (neg_ratio < 1) throw Error("neg_ratio must be >= 1");
  if (heads < 1) throw Error("heads must be >= 1");
  if (hops < 1) throw Error("hops must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error("validation_fraction must be in [0, 1)");
  }
}

GraphOperators::GraphOperators(const CumulativeView& view) : view_(&view) {
  const auto n = view.num_users();
  const auto rows = static_cast<Eigen::Index>(n);

  std::vector<Eigen::Triplet<double>> norm;
  std::vector<Eigen::Triplet<double>> mean;
  norm.reserve(view.targets().size() + n);
  mean.reserve(view.targets().size());
  std::vector<double> inv_sqrt(n);
  for (UserId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(view.degree(u) + 1));

  attention_.offsets.assign(n + 1, 0);
  attention_.sources.reserve(view.targets().size() + n);
  for (UserId u = 0; u < n; ++u) {
    norm.emplace_back(u, u, inv_sqrt[u] * inv_sqrt[u]);
    const auto nbrs = view.neighbors(u);
    const double inv_deg = nbrs.empty() ? 0.0 : 1.0 / static_cast<double>(nbrs.size());
    bool self_placed = false;
    for (UserId v : nbrs) {
      norm.emplace_back(u, v, inv_sqrt[u] * inv_sqrt[v]);
      mean.emplace_back(u, v, inv_deg);
      if (!self_placed && v > u) {
        attention_.sources.push_back(u);
        self_placed = true;
      }
      attention_.sources.push_back(v);
    }
    if (!self_placed) attention_.sources.push_back(u);
    attention_.offsets[u + 1] = attention_.sources.size();
  }
  normalized_.resize(rows, rows);
  normalized_.setFromTriplets(norm.begin(), norm.end());
  mean_.resize(rows, rows);
  mean_.setFromTriplets(mean.begin(), mean.end());
}

LinkScorer LinkScorer::init(BackboneKind kind, std::size_t num_users, const TrainingHyper& hyper,
                            std::uint64_t seed, UserId owner) {
  if (num_users < 2) throw Error("scorer needs at least 2 users");
  hyper.validate();
  LinkScorer s;
  s.kind_ = kind;
  s.owner_ = owner;
  s.seed_ = seed;
  s.num_users_ = num_users;
  s.hyper_ = hyper;

  Rng rng(seed);
  const Eigen::Index d = hyper.embed_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  s.params_.push_back(uniform_matrix(static_cast<Eigen::Index>(num_users), d, bound, rng));
  const auto shape = layout(kind, hyper.heads);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i]) {
      s.params_.push_back(Matrix::Zero(1, d));
    } else if (is_attention_vector(kind, hyper.heads, i)) {
      s.params_.push_back(uniform_matrix(1, d, bound, rng));
    } else {
      s.params_.push_back(uniform_matrix(d, d, bound, rng));
    }
  }
  return s;
}

ad::Var build_forward(const LinkScorer& scorer, const GraphOperators& ops, ad::Tape& tape,
                      std::vector<ad::Var>& vars, Rng* dropout_rng) {
  const auto& params = scorer.parameters();
  if (params.empty()) throw Error("scorer is not initialized");
  if (static_cast<std::size_t>(params[0].rows()) != ops.num_users()) {
    throw Error("scorer user count does not match the message graph");
  }
  vars.clear();
  for (const auto& p : params) vars.push_back(tape.parameter(p));

  const double rate = scorer.hyper().dropout;
  auto drop = [&](ad::Var x) {
    if (dropout_rng == nullptr || rate <= 0.0) return x;
    const Matrix& v = tape.value(x);
    Matrix m(v.rows(), v.cols());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = uniform01(*dropout_rng) < rate ? 0.0 : keep_scale;
      }
    }
    return tape.mask(x, std::move(m));
  };
  auto linear = [&](ad::Var x, std::size_t w, std::size_t b) {
    return tape.add_row_bias(tape.matmul(x, vars[w]), vars[b]);
  };

  const ad::Var x = vars[0];
  switch (scorer.kind()) {
    case BackboneKind::MLP: {
      auto h = tape.relu(linear(drop(x), 1, 2));
      return linear(drop(h), 3, 4);
    }
    case BackboneKind::GCN: {
      const auto& a = ops.normalized_adjacency();
      auto h = tape.relu(tape.add_row_bias(tape.spmm(a, tape.matmul(drop(x), vars[1])), vars[2]));
      return tape.add_row_bias(tape.spmm(a, tape.matmul(drop(h), vars[3])), vars[4]);
    }
    case BackboneKind::SAGE: {
      const auto& m = ops.mean_aggregator();
      auto layer = [&](ad::Var in, std::size_t base) {
        auto self = tape.matmul(in, vars[base]);
        auto neigh = tape.spmm(m, tape.matmul(in, vars[base + 1]));
        return tape.add_row_bias(tape.add(self, neigh), vars[base + 2]);
      };
      auto h = tape.relu(layer(drop(x), 1));
      return layer(drop(h), 4);
    }
    case BackboneKind::GAT: {
      const int heads = scorer.hyper().heads;
      const auto& graph = ops.attention_graph();
      auto layer = [&](ad::Var in, std::size_t base) {
        ad::Var sum{};
        for (int h = 0; h < heads; ++h) {
          const std::size_t k = base + 3 * static_cast<std::size_t>(h);
          auto src = tape.matmul(in, vars[k]);
          auto dst = tape.matmul(in, vars[k + 1]);
          auto out = tape.attention_head(src, dst, vars[k + 2], graph, kAttentionSlope);
          sum = h == 0 ? out : tape.add(sum, out);
        }
        auto mean = tape.scale(sum, 1.0 / static_cast<double>(heads));
        return tape.add_row_bias(mean, vars[base + 3 * static_cast<std::size_t>(heads)]);
      };
      auto h = tape.relu(layer(drop(x), 1));
      return layer(drop(h), 1 + 3 * static_cast<std::size_t>(heads) + 1);
    }
    case BackboneKind::SGC: {
      const auto& a = ops.normalized_adjacency();
      ad::Var prop = x;
      for (int k = 0; k < scorer.hyper().hops; ++k) prop = tape.spmm(a, prop);
      auto encoded = linear(drop(prop), 1, 2);
      auto hidden = tape.relu(linear(encoded, 3, 4));
      return linear(drop(hidden), 5, 6);
    }
  }
  throw Error("unsupported backbone kind");
}

Matrix LinkScorer::encode(const GraphOperators& ops) const {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  auto out = build_forward(*this, ops, tape, vars, nullptr);
  return tape.value(out);
}

void LinkScorer::bind(const GraphOperators& ops) { output_ = encode(ops); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot_score(const Matrix& z, UserId p, UserId q) {
  if (p >= static_cast<std::size_t>(z.rows()) || q >= static_cast<std::size_t>(z.rows())) {
    throw Error("user id out of range");
  }
  return logistic(z.row(p).dot(z.row(q)));
}

double LinkScorer::score(UserId p, UserId q) const {
  if (!bound()) throw Error("scorer has no encoded output; call bind() first");
  return dot_score(output_, p, q);
}

LossAndGradients loss_and_gradients(const LinkScorer& scorer, const GraphOperators& ops,
                                    std::span<const EdgePair> pairs,
                                    std::span<const double> labels, Rng* dropout_rng) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  auto z = build_forward(scorer, ops, tape, vars, dropout_rng);
  auto loss = tape.bce_with_logits(tape.pair_logits(z, pairs), labels);
  tape.backward(loss);
  LossAndGradients out;
  out.loss = tape.value(loss)(0, 0);
  out.gradients.reserve(vars.size());
  for (auto v : vars) out.gradients.push_back(tape.grad(v));
  return out;
}

SupervisionSplit split_supervision(std::span<const EdgePair> supervision, double fraction,
                                   const CumulativeView& message_view, Rng& rng) {
  std::vector<EdgePair> shuffled(supervision.begin(), supervision.end());
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[uniform_below(rng, i)]);
  }
  std::size_t held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(shuffled.size())));
  if (fraction > 0.0 && held == 0 && shuffled.size() >= 2) held = 1;

  SupervisionSplit split;
  split.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(held), shuffled.end());
  for (std::size_t i = 0; i < held; ++i) {
    const auto [p, q] = shuffled[i];
    const UserId exclude[] = {q};
    try {
      const auto neg = sample_negatives(message_view, p, 1, exclude, rng);
      split.validation.positives.push_back(shuffled[i]);
      split.validation.negatives.push_back(neg.front());
    } catch (const Error&) {
      // no eligible negative for this requester; drop it from validation
    }
  }
  return split;
}

double validation_accuracy(const Matrix& z, const ValidationSet& validation) {
  if (validation.positives.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < validation.positives.size(); ++i) {
    const auto [p, q] = validation.positives[i];
    if (dot_score(z, p, q) > dot_score(z, p, validation.negatives[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(validation.positives.size());
}

namespace {

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  int step = 0;
};

void apply_update(LinkScorer& scorer, const std::vector<Matrix>& grads, AdamState& adam) {
  auto& params = scorer.mutable_parameters();
  const double lr = scorer.hyper().learning_rate;
  if (scorer.hyper().optimizer == Optimizer::GradientDescent) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  if (adam.m.empty()) {
    for (const auto& p : params) {
      adam.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      adam.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  ++adam.step;
  const double c1 = 1.0 - std::pow(beta1, adam.step);
  const double c2 = 1.0 - std::pow(beta2, adam.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * grads[i];
    adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -= lr * (adam.m[i].array() / c1) / ((adam.v[i].array() / c2).sqrt() + eps);
  }
}

}  // namespace

TrainReport train_scorer(LinkScorer& scorer, const GraphOperators& message_ops,
                         std::span<const EdgePair> train, const ValidationSet& validation, Rng& rng) {
  if (train.empty()) throw Error("empty supervision");
  const auto& hyper = scorer.hyper();
  const auto& view = message_ops.view();
  const std::size_t n = message_ops.num_users();

  TrainReport report;
  std::vector<Matrix> best = scorer.parameters();
  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  AdamState adam;

  std::vector<EdgePair> pairs;
  std::vector<double> labels;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    pairs.assign(train.begin(), train.end());
    labels.assign(train.size(), 1.0);
    for (const auto& [p, q] : train) {
      for (int r = 0; r < hyper.neg_ratio; ++r) {
        for (int attempt = 0; attempt < 32; ++attempt) {
          const auto cand = static_cast<UserId>(uniform_below(rng, n));
          if (cand == p || cand == q || view.has_edge(p, cand)) continue;
          pairs.emplace_back(p, cand);
          labels.push_back(0.0);
          break;
        }
      }
    }

    auto lg = loss_and_gradients(scorer, message_ops, pairs, labels, &rng);
    if (!std::isfinite(lg.loss)) {
      throw Error("training diverged at epoch " + std::to_string(epoch));
    }
    apply_update(scorer, lg.gradients, adam);
    for (const auto& p : scorer.parameters()) {
      if (!p.allFinite()) throw Error("training diverged at epoch " + std::to_string(epoch));
    }

    const Matrix z = scorer.encode(message_ops);
    const double val = validation.positives.empty() ? -lg.loss : validation_accuracy(z, validation);
    report.loss.push_back(lg.loss);
    report.validation.push_back(val);
    report.epochs_run = epoch;
    if (val > best_score) {
      best_score = val;
      best = scorer.parameters();
      report.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= hyper.patience) break;
  }
  scorer.mutable_parameters() = std::move(best);
  return report;
}

namespace {

constexpr char kMagic[8] = {'D', 'S', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated scorer checkpoint");
  return value;
}

}  // namespace

void LinkScorer::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kind_));
  put<std::uint32_t>(out, owner_);
  put<std::uint64_t>(out, seed_);
  put<std::uint64_t>(out, num_users_);
  put<double>(out, hyper_.learning_rate);
  put<double>(out, hyper_.dropout);
  put<std::int32_t>(out, hyper_.epochs);
  put<std::int32_t>(out, hyper_.patience);
  put<std::int32_t>(out, hyper_.embed_dim);
  put<std::int32_t>(out, hyper_.neg_ratio);
  put<std::int32_t>(out, hyper_.heads);
  put<std::int32_t>(out, hyper_.hops);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(hyper_.optimizer));
  put<double>(out, hyper_.validation_fraction);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.cols()));
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(p.size() * sizeof(double)));
  }
  if (!out) throw Error("failed to write scorer checkpoint");
}

LinkScorer LinkScorer::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw Error("not a scorer checkpoint");
  }
  LinkScorer s;
  const auto kind = get<std::uint8_t>(in);
  if (kind > static_cast<std::uint8_t>(BackboneKind::SGC)) throw Error("unsupported backbone kind");
  s.kind_ = static_cast<BackboneKind>(kind);
  s.owner_ = get<std::uint32_t>(in);
  s.seed_ = get<std::uint64_t>(in);
  s.num_users_ = get<std::uint64_t>(in);
  s.hyper_.learning_rate = get<double>(in);
  s.hyper_.dropout = get<double>(in);
  s.hyper_.epochs = get<std::int32_t>(in);
  s.hyper_.patience = get<std::int32_t>(in);
  s.hyper_.embed_dim = get<std::int32_t>(in);
  s.hyper_.neg_ratio = get<std::int32_t>(in);
  s.hyper_.heads = get<std::int32_t>(in);
  s.hyper_.hops = get<std::int32_t>(in);
  s.hyper_.optimizer = static_cast<Optimizer>(get<std::uint8_t>(in));
  s.hyper_.validation_fraction = get<double>(in);
  s.hyper_.validate();
  const auto count = get<std::uint32_t>(in);
  if (count != layout(s.kind_, s.hyper_.heads).size() + 1) throw Error("checkpoint tensor count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw Error("truncated scorer checkpoint");
    for (Eigen::Index k = 0; k < m.size(); ++k) require_finite(m.data()[k], "checkpoint value");
    s.params_.push_back(std::move(m));
  }
  return s;
}

}  // namespace desocial
