#include "desocial/consensus.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "desocial/parallel.hpp"

namespace desocial {

Committee sample_committee(const AlgorithmAssignment& assignment, UserId requester, std::size_t n,
                           Period period, Rng& rng) {
  if (n == 0) throw Error("committee size must be >= 1");
  Committee committee;
  committee.requester = requester;
  committee.period = period;
  committee.backbone = assignment.choice_of(requester);

  std::vector<UserId> pool;
  for (UserId u : assignment.users_of(committee.backbone)) {
    if (u != requester) pool.push_back(u);
  }
  if (pool.empty()) throw Error("no validators for backbone");

  const std::size_t size = std::min(n, pool.size());
  for (std::size_t i = 0; i < size; ++i) {
    std::swap(pool[i], pool[i + uniform_below(rng, pool.size() - i)]);
  }
  committee.validators.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
  return committee;
}

std::map<UserId, Committee> form_committees(const AlgorithmAssignment& assignment,
                                            std::span<const UserId> requesters, std::size_t n,
                                            Period period, std::uint64_t seed) {
  std::map<UserId, Committee> out;
  for (UserId p : requesters) {
    if (out.count(p) != 0) continue;
    Rng rng = make_stream(seed, StreamTag::Committee, p, static_cast<std::uint64_t>(period));
    out.emplace(p, sample_committee(assignment, p, n, period, rng));
  }
  return out;
}

bool cast_vote(const PairScorer& scorer, const VoteContext& context) {
  const auto [p, q] = context.positive;
  const double positive = scorer.score(p, q);
  for (UserId neg : context.negatives) {
    if (!(positive > scorer.score(p, neg))) return false;
  }
  return true;
}

Verdict verify(const std::vector<bool>& votes) {
  if (votes.empty()) throw Error("cannot verify an empty vote list");
  Verdict v;
  v.agree_count = static_cast<std::size_t>(std::count(votes.begin(), votes.end(), true));
  v.decision = v.agree_count > votes.size() / 2;
  return v;
}

std::vector<UserId> validator_set(const std::map<UserId, Committee>& committees) {
  std::vector<UserId> out;
  for (const auto& [p, c] : committees) out.insert(out.end(), c.validators.begin(), c.validators.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PeriodOutcome run_period(std::span<const EvalQuery> queries,
                         const std::map<UserId, Committee>& committees, const ScorerLookup& scorer_of,
                         const VotingConfig& config, const CumulativeView* view) {
  if (config.ks.empty()) throw Error("no K values configured");
  if (config.request_batch == 0 || config.vote_batch == 0) throw Error("batch size must be >= 1");
  std::vector<int> ks = config.ks;
  std::sort(ks.begin(), ks.end());
  if (ks.front() < 1) throw Error("K must be >= 1");
  const auto max_negatives = static_cast<std::size_t>(ks.back() - 1);
  if (config.per_validator_negatives && view == nullptr) {
    throw Error("per-validator negatives need the cumulative view");
  }

  // Request batches: each requester's targets are chunked in query order.
  std::vector<std::size_t> request_batch(queries.size());
  {
    std::map<UserId, std::vector<std::size_t>> by_requester;
    for (std::size_t i = 0; i < queries.size(); ++i) by_requester[queries[i].positive.first].push_back(i);
    for (const auto& [p, idx] : by_requester) {
      const auto batches = batch_requests<std::size_t>(idx, config.request_batch);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        for (auto i : batches[b]) request_batch[i] = b;
      }
    }
  }

  std::vector<std::size_t> order(queries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto vote_batches = batch_requests<std::size_t>(order, config.vote_batch);

  PeriodOutcome outcome;
  outcome.results.resize(queries.size() * ks.size());
  for (std::size_t b = 0; b < vote_batches.size(); ++b) {
    const auto& batch = vote_batches[b];
    parallel_for(batch.size(), config.threads, [&](std::size_t slot) {
      const std::size_t i = batch[slot];
      const auto& query = queries[i];
      const UserId p = query.positive.first;
      auto it = committees.find(p);
      if (it == committees.end()) throw Error("no committee for requester " + std::to_string(p));
      const auto& members = it->second.validators;
      if (members.empty()) throw Error("empty committee for requester " + std::to_string(p));
      if (!config.per_validator_negatives && query.negatives.size() < max_negatives) {
        throw Error("query has fewer negatives than K-1");
      }

      std::vector<std::vector<UserId>> own_negatives;
      if (config.per_validator_negatives) {
        for (UserId v : members) {
          Rng rng = make_stream(config.seed, StreamTag::PerValidatorNegatives, v,
                                (static_cast<std::uint64_t>(query.period) << 32) ^ query.index);
          const UserId exclude[] = {query.positive.second};
          own_negatives.push_back(sample_negatives(*view, p, max_negatives == 0 ? 1 : max_negatives,
                                                   exclude, rng));
        }
      }

      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        const auto count = static_cast<std::size_t>(ks[ki] - 1);
        VerificationResult r;
        r.context.positive = query.positive;
        r.context.period = query.period;
        r.context.negatives.assign(query.negatives.begin(),
                                   query.negatives.begin() +
                                       static_cast<std::ptrdiff_t>(std::min(count, query.negatives.size())));
        r.requester = p;
        r.validators = members;
        r.k = ks[ki];
        r.query_index = i;
        r.request_batch = request_batch[i];
        r.vote_batch = b;
        r.votes.reserve(members.size());
        for (std::size_t m = 0; m < members.size(); ++m) {
          if (config.per_validator_negatives) {
            VoteContext own{query.positive,
                            std::vector<UserId>(own_negatives[m].begin(),
                                                own_negatives[m].begin() + static_cast<std::ptrdiff_t>(count)),
                            query.period};
            r.votes.push_back(cast_vote(scorer_of(members[m]), own));
          } else {
            r.votes.push_back(cast_vote(scorer_of(members[m]), r.context));
          }
        }
        const auto verdict = verify(r.votes);
        r.decision = verdict.decision;
        r.agree_count = verdict.agree_count;
        outcome.results[i * ks.size() + ki] = std::move(r);
      }
    });
  }
  outcome.validator_set = validator_set(committees);
  return outcome;
}

void write_verification_log(std::span<const VerificationResult> results, std::ostream& out) {
  for (const auto& r : results) {
    nlohmann::json rec;
    rec["period"] = r.context.period;
    rec["requester"] = r.requester;
    rec["target"] = r.context.positive.second;
    rec["K"] = r.k;
    rec["negatives"] = r.context.negatives;
    rec["validators"] = r.validators;
    std::vector<int> votes(r.votes.begin(), r.votes.end());
    rec["votes"] = votes;
    rec["decision"] = r.decision;
    out << rec.dump() << '\n';
  }
}

}  // namespace desocial
