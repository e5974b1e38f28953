#include "desocial/selection.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace desocial {

PairSample sample_pair_set(UserId u, const CumulativeView& view, const SnapshotSequence& seq,
                           std::size_t gamma, double alpha, Rng& rng) {
  if (gamma == 0) throw Error("gamma must be >= 1");
  const auto nbrs = view.neighbors(u);
  if (nbrs.empty()) throw Error("no positive neighbors");

  PairSample sample;
  sample.owner = u;
  sample.period = view.upto();
  sample.pairs.reserve(gamma);
  for (std::size_t i = 0; i < gamma; ++i) {
    SamplePair pair;
    pair.positive = nbrs[uniform_below(rng, nbrs.size())];
    pair.negative = sample_negatives(view, u, 1, {}, rng).front();
    const auto emerged = seq.last_seen(u, pair.positive, view.upto());
    pair.emerged = emerged.value_or(view.upto());
    pair.weight = std::exp(alpha * static_cast<double>(view.upto() - pair.emerged));
    sample.pairs.push_back(pair);
  }
  return sample;
}

double selection_score(const PairSample& sample, const PairScorer& scorer) {
  double total = 0.0;
  for (const auto& pair : sample.pairs) {
    if (scorer.score(sample.owner, pair.positive) > scorer.score(sample.owner, pair.negative)) {
      total += pair.weight;
    }
  }
  return total;
}

BackboneKind select_algorithm(const PairSample& sample, const CandidateScorers& candidates) {
  if (candidates.empty()) throw Error("empty backbone pool");
  std::optional<BackboneKind> best;
  double best_score = 0.0;
  for (auto kind : kAllBackbones) {
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [kind](const auto& c) { return c.first == kind; });
    if (it == candidates.end()) continue;
    if (it->second == nullptr) throw Error("missing candidate scorer for " + std::string(to_string(kind)));
    const double s = selection_score(sample, *it->second);
    if (!best || s > best_score) {
      best = kind;
      best_score = s;
    }
  }
  return *best;
}

BackboneKind rule_based_select(const NodeStats& stats, const BackbonePool& pool) {
  if (pool.empty()) throw Error("empty backbone pool");
  const auto deg = stats.degree;
  const double c = stats.clustering;
  if (deg >= 6 && pool_contains(pool, BackboneKind::SGC)) return BackboneKind::SGC;
  if (c < 0.2 && deg >= 4 && pool_contains(pool, BackboneKind::SAGE)) return BackboneKind::SAGE;
  if (deg <= 2 && pool_contains(pool, BackboneKind::MLP)) return BackboneKind::MLP;
  if (c >= 0.4 && pool_contains(pool, BackboneKind::GCN)) return BackboneKind::GCN;
  return pool.back();
}

std::string to_string(const StrategySpec& spec) {
  switch (spec.kind) {
    case SelectionStrategy::Personalized: return "personalized";
    case SelectionStrategy::Rule: return "rule";
    case SelectionStrategy::Random: return "random";
    case SelectionStrategy::Fixed: return "fixed:" + std::string(to_string(spec.fixed));
  }
  return "?";
}

StrategySpec parse_strategy(std::string_view text) {
  if (text == "personalized") return {SelectionStrategy::Personalized, BackboneKind::SGC};
  if (text == "rule" || text == "simple") return {SelectionStrategy::Rule, BackboneKind::SGC};
  if (text == "random") return {SelectionStrategy::Random, BackboneKind::SGC};
  constexpr std::string_view prefix = "fixed:";
  if (text.substr(0, prefix.size()) == prefix) {
    auto kind = parse_backbone(text.substr(prefix.size()));
    if (!kind) throw Error("unknown backbone in strategy '" + std::string(text) + "'");
    return StrategySpec::fixed_to(*kind);
  }
  throw Error("unknown strategy '" + std::string(text) + "'");
}

void AlgorithmAssignment::assign(UserId user, BackboneKind kind) {
  auto it = choices_.find(user);
  if (it != choices_.end()) {
    auto& old = by_backbone_[it->second];
    old.erase(std::find(old.begin(), old.end(), user));
    it->second = kind;
  } else {
    choices_.emplace(user, kind);
  }
  auto& users = by_backbone_[kind];
  users.insert(std::upper_bound(users.begin(), users.end(), user), user);
}

const std::vector<UserId>& AlgorithmAssignment::users_of(BackboneKind kind) const {
  static const std::vector<UserId> empty;
  auto it = by_backbone_.find(kind);
  return it == by_backbone_.end() ? empty : it->second;
}

BackboneKind AlgorithmAssignment::choice_of(UserId user) const {
  auto it = choices_.find(user);
  if (it == choices_.end()) throw Error("user " + std::to_string(user) + " has no assignment");
  return it->second;
}

AlgorithmAssignment assign_all(const StrategySpec& strategy, std::span<const UserId> requesters,
                               const SelectionContext& context) {
  if (context.pool.empty()) throw Error("empty backbone pool");
  AlgorithmAssignment out(strategy);
  const auto n = context.view ? context.view->num_users() : 0;
  auto require_view = [&]() {
    if (context.view == nullptr) throw Error("selection context has no view");
  };

  for (UserId u : requesters) {
    if (context.view && u >= n) throw Error("requester " + std::to_string(u) + " is not a known user");
    switch (strategy.kind) {
      case SelectionStrategy::Fixed:
        if (!pool_contains(context.pool, strategy.fixed)) throw Error("fixed backbone not in pool");
        out.assign(u, strategy.fixed);
        break;
      case SelectionStrategy::Random: {
        Rng rng = make_stream(context.seed, StreamTag::RandomSelect, u,
                              static_cast<std::uint64_t>(context.period));
        out.assign(u, context.pool[uniform_below(rng, context.pool.size())]);
        break;
      }
      case SelectionStrategy::Rule:
        require_view();
        out.assign(u, rule_based_select(clustering_coefficient(*context.view, u), context.pool));
        break;
      case SelectionStrategy::Personalized: {
        require_view();
        if (context.seq == nullptr) throw Error("selection context has no snapshot sequence");
        if (context.pool.size() == 1) {
          out.assign(u, context.pool.front());
          break;
        }
        const auto degree = context.view->degree(u);
        if (degree == 0 || degree + 1 >= n) {
          // No (neighbor, non-neighbor) pair exists for this user.
          out.assign(u, rule_based_select(clustering_coefficient(*context.view, u), context.pool));
          break;
        }
        CandidateScorers restricted;
        for (const auto& c : context.candidates) {
          if (pool_contains(context.pool, c.first)) restricted.push_back(c);
        }
        if (restricted.size() != context.pool.size()) {
          throw Error("candidate scorers do not cover the backbone pool");
        }
        Rng rng = make_stream(context.seed, StreamTag::Selection, u,
                              static_cast<std::uint64_t>(context.period));
        const auto sample =
            sample_pair_set(u, *context.view, *context.seq, context.gamma, context.alpha, rng);
        out.assign(u, select_algorithm(sample, restricted));
        break;
      }
    }
  }
  return out;
}

void write_assignment_csv(const AlgorithmAssignment& assignment, std::ostream& out) {
  out << "user,backbone\n";
  for (const auto& [user, kind] : assignment.choices()) out << user << ',' << to_string(kind) << '\n';
}

}  // namespace desocial
