#include "desocial/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <set>

#include "desocial/parallel.hpp"

namespace desocial {

namespace {

std::uint64_t pair_key(UserId p, UserId q) { return (static_cast<std::uint64_t>(p) << 32) | q; }

// Distinguishes (period, kind) streams; bit 3 separates replicas from
// validators that share the numeric id.
std::uint64_t period_key(Period s, BackboneKind kind, bool replica = false) {
  return static_cast<std::uint64_t>(s) * 16 + static_cast<std::uint64_t>(kind) + (replica ? 8 : 0);
}

// Entities above the user-id range so these streams never alias a validator's.
std::uint64_t canonical_entity(BackboneKind kind) { return (1ULL << 40) + static_cast<std::uint64_t>(kind); }
std::uint64_t search_entity(BackboneKind kind) { return (2ULL << 40) + static_cast<std::uint64_t>(kind); }

/// Scores of one trained scorer, kept either for a fixed pair list or as the
/// whole output matrix. The parameters themselves are discarded.
class CachedScorer : public PairScorer {
 public:
  CachedScorer() = default;
  explicit CachedScorer(Matrix z) : z_(std::move(z)), full_(true) {}
  CachedScorer(const Matrix& z, std::vector<std::uint64_t> keys) : keys_(std::move(keys)) {
    values_.reserve(keys_.size());
    for (auto key : keys_) {
      values_.push_back(dot_score(z, static_cast<UserId>(key >> 32), static_cast<UserId>(key)));
    }
  }

  double score(UserId p, UserId q) const override {
    if (full_) return dot_score(z_, p, q);
    const auto key = pair_key(p, q);
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) {
      throw Error("no cached score for (" + std::to_string(p) + ", " + std::to_string(q) + ")");
    }
    return values_[static_cast<std::size_t>(it - keys_.begin())];
  }

 private:
  Matrix z_;
  bool full_ = false;
  std::vector<std::uint64_t> keys_;
  std::vector<double> values_;
};

template <class F>
auto stage(std::uint64_t seed, Period period, const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error("seed " + std::to_string(seed) + " period " + std::to_string(period) + " " + name + ": " +
                e.what());
  }
}

struct TrainInputs {
  const GraphOperators* message_ops = nullptr;
  const GraphOperators* history_ops = nullptr;
  const std::vector<EdgePair>* supervision = nullptr;
};

LinkScorer train_one(BackboneKind kind, const TrainingHyper& hyper, std::uint64_t init_seed, Rng& rng,
                     const TrainInputs& in, UserId owner, TrainReport* report = nullptr) {
  const auto& message_view = in.message_ops->view();
  auto scorer = LinkScorer::init(kind, message_view.num_users(), hyper, init_seed, owner);
  auto split = split_supervision(*in.supervision, hyper.validation_fraction, message_view, rng);
  auto r = train_scorer(scorer, *in.message_ops, split.train, split.validation, rng);
  if (report) *report = std::move(r);
  scorer.bind(*in.history_ops);
  return scorer;
}

std::string assignment_key(const MethodSpec& m) {
  return to_string(m.strategy) + "|" + pool_to_string(m.pool);
}

bool needs_candidates(const MethodSpec& m) {
  return m.strategy.kind == SelectionStrategy::Personalized && m.pool.size() > 1;
}

/// Views and operators of one test period; held by pointer because the
/// operators reference the views.
struct PeriodGraphs {
  Period s = 0;
  CumulativeView message;   // D^{s-2}
  CumulativeView history;   // D^{s-1}
  CumulativeView canonical; // D^{s-3}, or D^{s-2} at the first trainable period
  std::unique_ptr<GraphOperators> message_ops;
  std::unique_ptr<GraphOperators> history_ops;
  std::unique_ptr<GraphOperators> canonical_ops;
  Period canonical_supervision = 0;

  PeriodGraphs(const SnapshotSequence& seq, Period period) : s(period) {
    message = cumulative_view(seq, s - 2);
    history = cumulative_view(seq, s - 1);
    const Period cm = std::max(0, s - 3);
    canonical_supervision = cm + 1;
    canonical = cumulative_view(seq, cm);
    message_ops = std::make_unique<GraphOperators>(message);
    history_ops = std::make_unique<GraphOperators>(history);
    canonical_ops = std::make_unique<GraphOperators>(canonical);
  }
};

std::map<BackboneKind, TrainingHyper> search_hyper(const ExperimentConfig& config, std::uint64_t seed,
                                                   const std::set<BackboneKind>& kinds,
                                                   const PeriodGraphs& g, const SnapshotSequence& seq) {
  std::map<BackboneKind, TrainingHyper> chosen;
  const TrainInputs in{g.message_ops.get(), g.history_ops.get(), &seq.at(g.s - 1).edges};
  for (auto kind : kinds) {
    double best = -1.0;
    TrainingHyper best_hyper = config.hyper_for(kind);
    for (double lr : config.search_learning_rates) {
      for (double dropout : config.search_dropouts) {
        auto h = config.hyper_for(kind);
        h.learning_rate = lr;
        h.dropout = dropout;
        h.validate();
        // Every grid point starts from the same initialization and stream.
        Rng rng = make_stream(seed, StreamTag::Training, search_entity(kind), period_key(g.s, kind));
        TrainReport report;
        train_one(kind, h, derive_seed(seed, StreamTag::CanonicalInit, search_entity(kind), period_key(g.s, kind)),
                  rng, in, 0, &report);
        const double score = report.validation.empty() ? 0.0 : report.validation[report.best_epoch - 1];
        if (score > best) {
          best = score;
          best_hyper = h;
        }
      }
    }
    chosen[kind] = best_hyper;
  }
  return chosen;
}

/// Committee for one requester. Falls back to the requester alone when nobody
/// else holds its backbone.
Committee committee_for(const AlgorithmAssignment& assignment, UserId p, std::size_t n, Period s,
                        std::uint64_t seed, bool& fallback) {
  const auto kind = assignment.choice_of(p);
  const auto& holders = assignment.users_of(kind);
  const bool only_self = holders.empty() || (holders.size() == 1 && holders.front() == p);
  fallback = only_self;
  if (only_self) return Committee{p, s, kind, {p}};
  Rng rng = make_stream(seed, StreamTag::Committee, p, static_cast<std::uint64_t>(s));
  return sample_committee(assignment, p, n, s, rng);
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& config) {
  Dataset data;
  if (config.dataset == "synthetic") {
    auto spec = config.synthetic;
    spec.slices = config.slices;
    data.sequence = generate_synthetic(spec);
    return data;
  }
  auto ingest = ingest_edge_list_file(config.dataset);
  data.sequence = partition_slices(ingest.edges, config.slices, ingest.num_users());
  data.tokens = std::move(ingest.tokens);
  return data;
}

std::optional<Variant> parse_variant(std::string_view text) {
  if (text == "single") return Variant::Single;
  if (text == "no_personalized") return Variant::NoPersonalized;
  if (text == "random_select") return Variant::RandomSelect;
  if (text == "simple_select") return Variant::SimpleSelect;
  if (text == "no_consensus") return Variant::NoConsensus;
  return std::nullopt;
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::Single: return "single";
    case Variant::NoPersonalized: return "no_personalized";
    case Variant::RandomSelect: return "random_select";
    case Variant::SimpleSelect: return "simple_select";
    case Variant::NoConsensus: return "no_consensus";
  }
  return "unknown";
}

MethodSpec full_method(const ExperimentConfig& config) {
  return {"DeSocial", config.strategy, config.pool, config.committee_size};
}

MethodSpec variant_method(const ExperimentConfig& config, Variant variant,
                          std::optional<BackboneKind> backbone) {
  const bool needs_backbone = variant == Variant::Single || variant == Variant::NoPersonalized;
  if (needs_backbone) {
    if (!backbone) throw Error(std::string(to_string(variant)) + " needs a backbone");
    if (!pool_contains(config.pool, *backbone)) throw Error("backbone not in pool");
  }
  switch (variant) {
    case Variant::Single:
      return {"single:" + std::string(to_string(*backbone)), StrategySpec::fixed_to(*backbone),
              {*backbone}, 1};
    case Variant::NoPersonalized:
      return {"no_personalized:" + std::string(to_string(*backbone)), StrategySpec::fixed_to(*backbone),
              {*backbone}, config.committee_size};
    case Variant::RandomSelect:
      return {"random_select", {SelectionStrategy::Random}, config.pool, config.committee_size};
    case Variant::SimpleSelect:
      return {"simple_select", {SelectionStrategy::Rule}, config.pool, config.committee_size};
    case Variant::NoConsensus:
      return {"no_consensus", config.strategy, config.pool, 1};
  }
  throw Error("unknown variant");
}

std::vector<MethodSpec> standard_methods(const ExperimentConfig& config) {
  std::vector<MethodSpec> methods{full_method(config), variant_method(config, Variant::NoConsensus)};
  for (auto kind : config.pool) methods.push_back(variant_method(config, Variant::NoPersonalized, kind));
  for (auto kind : config.pool) methods.push_back(variant_method(config, Variant::Single, kind));
  return methods;
}

RunBundle run_methods(const ExperimentConfig& config, const Dataset& data,
                      const std::vector<MethodSpec>& methods, const HarnessHooks& hooks) {
  config.validate();
  if (methods.empty()) throw Error("no methods to run");
  {
    std::set<std::string> names;
    for (const auto& m : methods) {
      if (!names.insert(m.name).second) throw Error("duplicate method name " + m.name);
      if (m.pool.empty()) throw Error("method " + m.name + " has an empty pool");
      if (m.committee_size == 0) throw Error("n must be ≥ 1");
    }
  }
  const auto& seq = data.sequence;
  if (static_cast<int>(seq.size()) != config.slices) throw Error("dataset slice count does not match T");
  const auto started = std::chrono::steady_clock::now();

  std::set<BackboneKind> kinds_used;
  std::set<BackboneKind> candidate_kinds;
  for (const auto& m : methods) {
    kinds_used.insert(m.pool.begin(), m.pool.end());
    if (needs_candidates(m)) candidate_kinds.insert(m.pool.begin(), m.pool.end());
  }

  RunBundle bundle;
  bundle.config = config;
  bundle.methods = methods;

  for (const auto seed : config.seeds) {
    SeedResult result;
    result.seed = seed;
    std::map<BackboneKind, TrainingHyper> hyper;
    for (auto kind : kinds_used) hyper[kind] = config.hyper_for(kind);

    for (Period s = config.start_test_period; s <= config.end_test_period; ++s) {
      const PeriodGraphs g(seq, s);
      const auto& supervision = seq.at(s - 1).edges;
      const TrainInputs validator_inputs{g.message_ops.get(), g.history_ops.get(), &supervision};
      const TrainInputs canonical_inputs{g.canonical_ops.get(), g.history_ops.get(),
                                         &seq.at(g.canonical_supervision).edges};

      if (config.hyper_search && s == config.start_test_period) {
        result.searched = stage(seed, s, "hyper_search", [&] { return search_hyper(config, seed, kinds_used, g, seq); });
        hyper = result.searched;
      }

      PeriodRecord record;
      record.period = s;
      const QuerySet qs = stage(seed, s, "queries", [&] {
        Rng rng = make_stream(seed, StreamTag::Queries, 0, static_cast<std::uint64_t>(s));
        return build_queries(seq.at(s), g.history, config.ks, rng);
      });
      record.queries = qs.queries.size();
      record.skipped = qs.skipped;

      std::vector<UserId> requesters;
      for (const auto& q : qs.queries) requesters.push_back(q.positive.first);
      std::sort(requesters.begin(), requesters.end());
      requesters.erase(std::unique(requesters.begin(), requesters.end()), requesters.end());

      std::vector<UserId> users;
      for (UserId u = 0; u < seq.num_users(); ++u) {
        if (g.history.degree(u) > 0 || std::binary_search(requesters.begin(), requesters.end(), u)) {
          users.push_back(u);
        }
      }

      // Canonical per-kind scorers, trained strictly before the period.
      std::map<BackboneKind, CachedScorer> canonical;
      stage(seed, s, "canonical", [&] {
        std::vector<BackboneKind> kinds(candidate_kinds.begin(), candidate_kinds.end());
        std::vector<CachedScorer> out(kinds.size());
        for (auto kind : kinds) {
          if (hooks.on_train) {
            hooks.on_train({seed, s, kind, 0, true, g.canonical.upto(), g.canonical_supervision});
          }
        }
        parallel_for(kinds.size(), config.threads, [&](std::size_t i) {
          const auto kind = kinds[i];
          Rng rng = make_stream(seed, StreamTag::Training, canonical_entity(kind), period_key(s, kind));
          auto scorer = train_one(kind, hyper.at(kind),
                                  derive_seed(seed, StreamTag::CanonicalInit, canonical_entity(kind),
                                              period_key(s, kind)),
                                  rng, canonical_inputs, 0);
          out[i] = CachedScorer(scorer.output());
        });
        for (std::size_t i = 0; i < kinds.size(); ++i) canonical.emplace(kinds[i], std::move(out[i]));
      });

      // Assignments, shared by methods with the same strategy and pool.
      std::map<std::string, AlgorithmAssignment> assignments;
      stage(seed, s, "selection", [&] {
        for (const auto& m : methods) {
          const auto key = assignment_key(m);
          if (assignments.count(key)) continue;
          SelectionContext ctx;
          ctx.pool = m.pool;
          ctx.view = &g.history;
          ctx.seq = &seq;
          ctx.gamma = config.gamma;
          ctx.alpha = config.alpha;
          ctx.seed = seed;
          ctx.period = s;
          if (needs_candidates(m)) {
            for (auto kind : m.pool) ctx.candidates.emplace_back(kind, &canonical.at(kind));
          }
          assignments.emplace(key, assign_all(m.strategy, users, ctx));
        }
      });

      // Committees per method.
      std::vector<std::map<UserId, Committee>> committees(methods.size());
      stage(seed, s, "committees", [&] {
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
          const auto& m = methods[mi];
          const auto& assignment = assignments.at(assignment_key(m));
          std::size_t fallbacks = 0;
          for (UserId p : requesters) {
            bool fallback = false;
            committees[mi].emplace(p, committee_for(assignment, p, m.committee_size, s, seed, fallback));
            fallbacks += fallback ? 1 : 0;
          }
          record.self_validation[m.name] = fallbacks;
        }
      });

      const std::size_t replicas = config.validator_replicas;
      auto entity_of = [&](UserId v) -> UserId {
        if (replicas == 0) return v;
        return static_cast<UserId>(splitmix64(seed ^ (static_cast<std::uint64_t>(v) << 20)) % replicas);
      };

      // Every (kind, validator) scorer any method needs, with the pairs it will score.
      std::map<std::pair<BackboneKind, UserId>, std::vector<std::uint64_t>> needs;
      std::set<UserId> validators;
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (const auto& q : qs.queries) {
          const auto& c = committees[mi].at(q.positive.first);
          for (UserId v : c.validators) {
            validators.insert(v);
            auto& keys = needs[{c.backbone, entity_of(v)}];
            if (config.per_validator_negatives) continue;
            keys.push_back(pair_key(q.positive.first, q.positive.second));
            for (UserId neg : q.negatives) keys.push_back(pair_key(q.positive.first, neg));
          }
        }
      }
      record.validator_set.assign(validators.begin(), validators.end());

      std::map<std::pair<BackboneKind, UserId>, CachedScorer> trained;
      stage(seed, s, "training", [&] {
        std::vector<std::pair<BackboneKind, UserId>> jobs;
        for (auto& [key, keys] : needs) {
          std::sort(keys.begin(), keys.end());
          keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
          jobs.push_back(key);
          if (hooks.on_train) {
            hooks.on_train({seed, s, key.first, key.second, false, g.message.upto(), s - 1});
          }
        }
        std::vector<CachedScorer> out(jobs.size());
        parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
          const auto [kind, entity] = jobs[i];
          const bool replica = replicas > 0;
          const auto pk = period_key(s, kind, replica);
          Rng rng = make_stream(seed, StreamTag::Training, entity, pk);
          auto scorer = train_one(kind, hyper.at(kind), derive_seed(seed, StreamTag::ValidatorInit, entity, pk),
                                  rng, validator_inputs, entity);
          out[i] = config.per_validator_negatives ? CachedScorer(scorer.output())
                                                  : CachedScorer(scorer.output(), needs.at(jobs[i]));
        });
        for (std::size_t i = 0; i < jobs.size(); ++i) trained.emplace(jobs[i], std::move(out[i]));
      });

      VotingConfig voting;
      voting.ks = config.ks;
      voting.request_batch = config.request_batch;
      voting.vote_batch = config.vote_batch;
      voting.per_validator_negatives = config.per_validator_negatives;
      voting.seed = seed;
      voting.threads = config.threads;

      std::vector<UserId> ordered_requesters = requesters;
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const auto& m = methods[mi];
        const auto& assignment = assignments.at(assignment_key(m));
        auto outcome = stage(seed, s, "voting", [&] {
          ScorerLookup lookup = [&](UserId v) -> const PairScorer& {
            return trained.at({assignment.choice_of(v), entity_of(v)});
          };
          return run_period(qs.queries, committees[mi], lookup, voting, &g.history);
        });
        stage(seed, s, "evaluation", [&] {
          auto& report = result.accuracy[m.name];
          for (int k : config.ks) report.add(s, k, acc_consensus(outcome.results, k, qs.queries.size()));
          if (mi == 0) {
            if (ordered_requesters.size() >= 4) {
              const auto quartiles = quartile_partition(g.history, ordered_requesters);
              result.agreement.merge(full_agreement_by_quartile(outcome.results, quartiles, 2));
            }
            result.assignments.emplace(s, assignment);
            if (config.verification_log) {
              std::move(outcome.results.begin(), outcome.results.end(), std::back_inserter(result.verification));
            }
          }
        });
      }
      result.periods.push_back(std::move(record));
    }
    bundle.seeds.push_back(std::move(result));
  }
  bundle.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return bundle;
}

RunBundle run_experiment(const ExperimentConfig& config, const Dataset& data, const HarnessHooks& hooks) {
  return run_methods(config, data, standard_methods(config), hooks);
}

RunBundle run_ablation(const ExperimentConfig& config, const Dataset& data, Variant variant,
                       std::optional<BackboneKind> backbone) {
  return run_methods(config, data, {full_method(config), variant_method(config, variant, backbone)});
}

namespace {

int primary_k(const ExperimentConfig& config) {
  if (std::find(config.ks.begin(), config.ks.end(), 2) != config.ks.end()) return 2;
  return *std::min_element(config.ks.begin(), config.ks.end());
}

}  // namespace

RunBundle run_pool_sweep(const ExperimentConfig& config, const Dataset& data) {
  const auto subsets = all_subsets(config.pool);
  std::vector<MethodSpec> methods;
  for (const auto& subset : subsets) {
    methods.push_back({"pool:" + pool_to_string(subset), {SelectionStrategy::Personalized}, subset,
                       config.committee_size});
  }
  auto bundle = run_methods(config, data, methods);
  bundle.pool_sweep = pool_sweep(subsets, [&](const BackbonePool& pool) {
    return mean_accuracy(bundle, "pool:" + pool_to_string(pool));
  }, primary_k(config));
  return bundle;
}

RunBundle run_gain_vs_n(const ExperimentConfig& config, const Dataset& data,
                        const std::vector<std::size_t>& n_values) {
  if (n_values.empty()) throw Error("no committee sizes given");
  std::vector<std::size_t> sizes = n_values;
  sizes.push_back(1);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<MethodSpec> methods;
  for (auto n : sizes) {
    if (n == 0) throw Error("n must be ≥ 1");
    methods.push_back({"n=" + std::to_string(n), config.strategy, config.pool, n});
  }
  auto bundle = run_methods(config, data, methods);
  bundle.gain = gain_vs_n(n_values, [&](std::size_t n) {
    return std::make_pair(mean_accuracy(bundle, "n=" + std::to_string(n)), mean_accuracy(bundle, "n=1"));
  });
  return bundle;
}

std::map<int, double> mean_accuracy(const RunBundle& bundle, const std::string& method) {
  std::map<int, double> sum;
  for (const auto& seed : bundle.seeds) {
    auto it = seed.accuracy.find(method);
    if (it == seed.accuracy.end()) throw Error("unknown method " + method);
    for (const auto& [k, acc] : it->second.overall()) sum[k] += acc;
  }
  for (auto& [k, v] : sum) v /= static_cast<double>(bundle.seeds.size());
  return sum;
}

}  // namespace desocial
