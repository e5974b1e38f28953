#include "desocial/evaluation.hpp"

#include <algorithm>
#include <set>

namespace desocial {

QuerySet build_queries(const Snapshot& test, const CumulativeView& view, std::span<const int> ks,
                       Rng& rng) {
  if (ks.empty()) throw Error("no K values configured");
  const int max_k = *std::max_element(ks.begin(), ks.end());
  if (max_k < 1) throw Error("K must be >= 1");
  const auto count = static_cast<std::size_t>(max_k - 1);

  QuerySet set;
  set.period = test.index;
  for (const auto& edge : test.edges) {
    EvalQuery q;
    q.positive = edge;
    q.period = test.index;
    if (count > 0) {
      const UserId exclude[] = {edge.second};
      // Eligibility is checked up front so that skipped edges draw nothing.
      const std::size_t degree = view.degree(edge.first);
      const bool q_blocked = view.has_edge(edge.first, edge.second);
      const std::size_t blocked = degree + 1 + (q_blocked ? 0 : 1);
      if (view.num_users() < blocked + count) {
        ++set.skipped;
        continue;
      }
      q.negatives = sample_negatives(view, edge.first, count, exclude, rng);
    }
    q.index = set.queries.size();
    set.queries.push_back(std::move(q));
  }
  return set;
}

void AccReport::add(Period period, int k, AccCell cell) {
  auto& slot = cells_[{period, k}];
  slot.correct += cell.correct;
  slot.total += cell.total;
}

void AccReport::merge(const AccReport& other) {
  for (const auto& [key, cell] : other.cells_) add(key.first, key.second, cell);
}

std::map<std::pair<Period, int>, double> AccReport::per_period() const {
  std::map<std::pair<Period, int>, double> out;
  for (const auto& [key, cell] : cells_) out[key] = cell.accuracy();
  return out;
}

std::map<int, double> AccReport::overall() const {
  std::map<int, AccCell> sums;
  for (const auto& [key, cell] : cells_) {
    sums[key.second].correct += cell.correct;
    sums[key.second].total += cell.total;
  }
  std::map<int, double> out;
  for (const auto& [k, cell] : sums) out[k] = cell.accuracy();
  return out;
}

std::map<Period, std::size_t> AccReport::query_count() const {
  std::map<Period, std::size_t> out;
  for (const auto& [key, cell] : cells_) out.try_emplace(key.first, cell.total);
  return out;
}

AccCell acc_single(const PairScorer& scorer, std::span<const EvalQuery> queries, int k) {
  if (k < 1) throw Error("K must be >= 1");
  const auto count = static_cast<std::size_t>(k - 1);
  AccCell cell;
  for (const auto& q : queries) {
    if (q.negatives.size() < count) throw Error("query has fewer negatives than K-1");
    const double pos = scorer.score(q.positive.first, q.positive.second);
    bool win = true;
    for (std::size_t i = 0; i < count && win; ++i) {
      win = pos > scorer.score(q.positive.first, q.negatives[i]);
    }
    cell.correct += win ? 1 : 0;
    ++cell.total;
  }
  return cell;
}

AccCell acc_consensus(std::span<const VerificationResult> results, int k,
                      std::optional<std::size_t> expected_queries) {
  AccCell cell;
  std::set<std::size_t> seen;
  for (const auto& r : results) {
    if (r.k != k) continue;
    if (!seen.insert(r.query_index).second) throw Error("duplicate result for one query");
    cell.correct += r.decision ? 1 : 0;
    ++cell.total;
  }
  if (expected_queries && cell.total != *expected_queries) {
    throw Error("results do not match the query set");
  }
  return cell;
}

void AgreementReport::merge(const AgreementReport& other) {
  for (std::size_t q = 0; q < 4; ++q) {
    per_quartile[q].accepted += other.per_quartile[q].accepted;
    per_quartile[q].unanimous += other.per_quartile[q].unanimous;
  }
}

AgreementReport full_agreement_by_quartile(std::span<const VerificationResult> results,
                                           const std::array<std::vector<UserId>, 4>& quartiles,
                                           int k) {
  std::map<UserId, std::size_t> quartile_of;
  for (std::size_t q = 0; q < 4; ++q) {
    for (UserId u : quartiles[q]) {
      if (!quartile_of.emplace(u, q).second) throw Error("quartiles overlap");
    }
  }
  AgreementReport report;
  for (const auto& r : results) {
    if (r.k != k) continue;
    auto it = quartile_of.find(r.requester);
    if (it == quartile_of.end()) {
      throw Error("requester " + std::to_string(r.requester) + " is in no quartile");
    }
    if (!r.decision) continue;
    auto& slot = report.per_quartile[it->second];
    ++slot.accepted;
    if (r.agree_count == r.votes.size()) ++slot.unanimous;
  }
  return report;
}

namespace {

bool canonical_less(const BackbonePool& a, const BackbonePool& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

BackbonePool canonicalized(BackbonePool pool) {
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::vector<BackbonePool> all_subsets(const BackbonePool& pool) {
  const auto sorted = canonicalized(pool);
  std::vector<BackbonePool> out;
  for (unsigned mask = 1; mask < (1u << sorted.size()); ++mask) {
    BackbonePool subset;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (mask & (1u << i)) subset.push_back(sorted[i]);
    }
    out.push_back(std::move(subset));
  }
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

std::vector<PoolSweepRow> pool_sweep(std::span<const BackbonePool> subsets, const PoolRunner& run,
                                     int primary_k) {
  std::vector<BackbonePool> ordered;
  for (const auto& s : subsets) {
    if (s.empty()) throw Error("pool subsets must be non-empty");
    ordered.push_back(canonicalized(s));
  }
  std::sort(ordered.begin(), ordered.end(), canonical_less);
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  std::map<BackbonePool, std::map<int, double>> cache;
  auto evaluate = [&](const BackbonePool& pool) -> const std::map<int, double>& {
    auto it = cache.find(pool);
    if (it == cache.end()) it = cache.emplace(pool, run(pool)).first;
    return it->second;
  };

  std::vector<PoolSweepRow> rows;
  for (const auto& subset : ordered) {
    PoolSweepRow row;
    row.subset = subset;
    row.accuracy = evaluate(subset);
    if (subset.size() > 1) {
      const double mine = row.accuracy.at(primary_k);
      row.improved = std::all_of(subset.begin(), subset.end(), [&](BackboneKind kind) {
        return mine > evaluate(BackbonePool{kind}).at(primary_k);
      });
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<GainPoint> gain_vs_n(std::span<const std::size_t> n_values, const GainRunner& run) {
  std::vector<GainPoint> curve;
  for (auto n : n_values) {
    if (n == 0) throw Error("committee size must be >= 1");
    GainPoint point;
    point.n = n;
    auto [consensus, single] = run(n);
    point.consensus = std::move(consensus);
    point.single = std::move(single);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [k, acc] : point.consensus) {
      total += acc - point.single.at(k);
      ++count;
    }
    point.mean_gain = count == 0 ? 0.0 : total / static_cast<double>(count);
    curve.push_back(std::move(point));
  }
  return curve;
}

}  // namespace desocial
