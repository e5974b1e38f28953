#include "desocial/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace desocial {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= text.size()) {
    auto j = text.find_first_of(", ", i);
    if (j == std::string_view::npos) j = text.size();
    auto item = trim(text.substr(i, j - i));
    if (!item.empty()) out.push_back(item);
    i = j + 1;
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(key + " must be a number, got '" + value + "'");
  }
}

long long to_integer(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(key + " must be an integer, got '" + value + "'");
  }
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const auto v = to_integer(key, value);
  if (v < 0) throw Error(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw Error(key + " must be a boolean, got '" + value + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
      {"T", [](auto& c, auto& k, auto& v) { c.slices = static_cast<int>(to_integer(k, v)); }},
      {"start_test_period",
       [](auto& c, auto& k, auto& v) { c.start_test_period = static_cast<int>(to_integer(k, v)); }},
      {"end_test_period",
       [](auto& c, auto& k, auto& v) { c.end_test_period = static_cast<int>(to_integer(k, v)); }},
      {"pool", [](auto& c, auto&, auto& v) { c.pool = parse_pool(v); }},
      {"strategy", [](auto& c, auto&, auto& v) { c.strategy = parse_strategy(v); }},
      {"n", [](auto& c, auto& k, auto& v) {
         const auto n = to_integer(k, v);
         if (n < 1) throw Error("n must be ≥ 1");
         c.committee_size = static_cast<std::size_t>(n);
       }},
      {"K_values", [](auto& c, auto& k, auto& v) {
         c.ks.clear();
         for (const auto& item : split_list(v)) c.ks.push_back(static_cast<int>(to_integer(k, item)));
       }},
      {"gamma", [](auto& c, auto& k, auto& v) { c.gamma = to_count(k, v); }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"B_req", [](auto& c, auto& k, auto& v) { c.request_batch = to_count(k, v); }},
      {"B_vote", [](auto& c, auto& k, auto& v) { c.vote_batch = to_count(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.hyper.learning_rate = to_double(k, v); }},
      {"dropout", [](auto& c, auto& k, auto& v) { c.hyper.dropout = to_double(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.hyper.epochs = static_cast<int>(to_integer(k, v)); }},
      {"patience", [](auto& c, auto& k, auto& v) { c.hyper.patience = static_cast<int>(to_integer(k, v)); }},
      {"embed_dim", [](auto& c, auto& k, auto& v) { c.hyper.embed_dim = static_cast<int>(to_integer(k, v)); }},
      {"neg_ratio", [](auto& c, auto& k, auto& v) { c.hyper.neg_ratio = static_cast<int>(to_integer(k, v)); }},
      {"heads", [](auto& c, auto& k, auto& v) { c.hyper.heads = static_cast<int>(to_integer(k, v)); }},
      {"hops", [](auto& c, auto& k, auto& v) { c.hyper.hops = static_cast<int>(to_integer(k, v)); }},
      {"optimizer", [](auto& c, auto& k, auto& v) {
         if (v == "adam") {
           c.hyper.optimizer = Optimizer::Adam;
         } else if (v == "gd" || v == "sgd") {
           c.hyper.optimizer = Optimizer::GradientDescent;
         } else {
           throw Error(k + " must be 'adam' or 'gd'");
         }
       }},
      {"validation_fraction",
       [](auto& c, auto& k, auto& v) { c.hyper.validation_fraction = to_double(k, v); }},
      {"hyper_search", [](auto& c, auto& k, auto& v) { c.hyper_search = to_bool(k, v); }},
      {"search_learning_rates", [](auto& c, auto& k, auto& v) {
         c.search_learning_rates.clear();
         for (const auto& item : split_list(v)) c.search_learning_rates.push_back(to_double(k, item));
       }},
      {"search_dropouts", [](auto& c, auto& k, auto& v) {
         c.search_dropouts.clear();
         for (const auto& item : split_list(v)) c.search_dropouts.push_back(to_double(k, item));
       }},
      {"seeds", [](auto& c, auto& k, auto& v) {
         c.seeds.clear();
         for (const auto& item : split_list(v)) c.seeds.push_back(static_cast<std::uint64_t>(to_count(k, item)));
       }},
      {"output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"per_validator_negatives",
       [](auto& c, auto& k, auto& v) { c.per_validator_negatives = to_bool(k, v); }},
      {"validator_replicas", [](auto& c, auto& k, auto& v) { c.validator_replicas = to_count(k, v); }},
      {"verification_log", [](auto& c, auto& k, auto& v) { c.verification_log = to_bool(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = std::max<std::size_t>(1, to_count(k, v)); }},
      {"synthetic_users", [](auto& c, auto& k, auto& v) { c.synthetic.num_users = to_count(k, v); }},
      {"synthetic_edges", [](auto& c, auto& k, auto& v) { c.synthetic.num_edges = to_count(k, v); }},
      {"synthetic_model", [](auto& c, auto& k, auto& v) {
         auto model = parse_synthetic_model(v);
         if (!model) throw Error(k + " must be uniform, preferential or community");
         c.synthetic.model = *model;
       }},
      {"synthetic_seed", [](auto& c, auto& k, auto& v) { c.synthetic.seed = to_count(k, v); }},
      {"synthetic_communities", [](auto& c, auto& k, auto& v) { c.synthetic.communities = to_count(k, v); }},
      {"synthetic_intra", [](auto& c, auto& k, auto& v) { c.synthetic.intra_probability = to_double(k, v); }},
      {"synthetic_repeat", [](auto& c, auto& k, auto& v) { c.synthetic.repeat_probability = to_double(k, v); }},
  };
  return table;
}

}  // namespace

TrainingHyper ExperimentConfig::hyper_for(BackboneKind kind) const {
  TrainingHyper h = hyper;
  if (auto it = learning_rate_by_kind.find(kind); it != learning_rate_by_kind.end()) h.learning_rate = it->second;
  if (auto it = dropout_by_kind.find(kind); it != dropout_by_kind.end()) h.dropout = it->second;
  return h;
}

void ExperimentConfig::validate() const {
  if (slices < 3) throw Error("T must be ≥ 3");
  if (start_test_period < 2) throw Error("start_test_period must be ≥ 2");
  if (end_test_period < start_test_period) throw Error("end_test_period must be ≥ start_test_period");
  if (end_test_period >= slices) throw Error("end_test_period must be < T");
  if (pool.empty()) throw Error("pool must be non-empty");
  if (strategy.kind == SelectionStrategy::Fixed && !pool_contains(pool, strategy.fixed)) {
    throw Error("strategy backbone must be in pool");
  }
  if (committee_size < 1) throw Error("n must be ≥ 1");
  if (ks.empty()) throw Error("K_values must be non-empty");
  for (int k : ks) {
    if (k < 1) throw Error("K_values entries must be ≥ 1");
  }
  if (gamma < 1) throw Error("gamma must be ≥ 1");
  if (request_batch < 1) throw Error("B_req must be ≥ 1");
  if (vote_batch < 1) throw Error("B_vote must be ≥ 1");
  if (seeds.empty()) throw Error("seeds must be non-empty");
  if (hyper_search && (search_learning_rates.empty() || search_dropouts.empty())) {
    throw Error("search_learning_rates and search_dropouts must be non-empty");
  }
  for (auto kind : pool) {
    try {
      hyper_for(kind).validate();
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " (" + std::string(to_string(kind)) + ")");
    }
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  bool start_set = false;
  bool end_set = false;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(line_number) + ": expected key = value");
    }
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));

    // Per-backbone overrides: learning_rate.GCN, dropout.SAGE
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      const auto base = key.substr(0, dot);
      const auto kind = parse_backbone(key.substr(dot + 1));
      if (!kind || (base != "learning_rate" && base != "dropout")) throw Error("unknown config key '" + key + "'");
      (base == "learning_rate" ? config.learning_rate_by_kind : config.dropout_by_kind)[*kind] =
          to_double(key, value);
      continue;
    }
    auto it = setters().find(key);
    if (it == setters().end()) throw Error("unknown config key '" + key + "'");
    it->second(config, key, value);
    start_set |= key == "start_test_period";
    end_set |= key == "end_test_period";
  }
  if (!end_set) config.end_test_period = config.slices - 1;
  if (!start_set) config.start_test_period = std::max(2, config.slices - 10);
  config.synthetic.slices = config.slices;
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  return parse_config(in);
}

void apply_environment(ExperimentConfig& config) {
  if (const char* seed = std::getenv("DESOCIAL_SEED"); seed != nullptr && *seed != '\0') {
    config.seeds = {static_cast<std::uint64_t>(to_count("DESOCIAL_SEED", seed))};
  }
  if (const char* threads = std::getenv("DESOCIAL_THREADS"); threads != nullptr && *threads != '\0') {
    config.threads = std::max<std::size_t>(1, to_count("DESOCIAL_THREADS", threads));
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["dataset"] = c.dataset;
  if (c.dataset == "synthetic") {
    j["synthetic"] = {{"users", c.synthetic.num_users},
                      {"edges", c.synthetic.num_edges},
                      {"model", c.synthetic.model == SyntheticModel::Uniform        ? "uniform"
                                : c.synthetic.model == SyntheticModel::Preferential ? "preferential"
                                                                                    : "community"},
                      {"seed", c.synthetic.seed},
                      {"communities", c.synthetic.communities},
                      {"intra", c.synthetic.intra_probability},
                      {"repeat", c.synthetic.repeat_probability}};
  }
  j["T"] = c.slices;
  j["start_test_period"] = c.start_test_period;
  j["end_test_period"] = c.end_test_period;
  j["pool"] = pool_to_string(c.pool);
  j["strategy"] = to_string(c.strategy);
  j["n"] = c.committee_size;
  j["K_values"] = c.ks;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["B_req"] = c.request_batch;
  j["B_vote"] = c.vote_batch;
  nlohmann::json hyper;
  for (auto kind : c.pool) {
    const auto h = c.hyper_for(kind);
    hyper[std::string(to_string(kind))] = {{"learning_rate", h.learning_rate},
                                           {"dropout", h.dropout},
                                           {"epochs", h.epochs},
                                           {"patience", h.patience},
                                           {"embed_dim", h.embed_dim},
                                           {"neg_ratio", h.neg_ratio},
                                           {"heads", h.heads},
                                           {"hops", h.hops},
                                           {"optimizer", h.optimizer == Optimizer::Adam ? "adam" : "gd"},
                                           {"validation_fraction", h.validation_fraction}};
  }
  j["hyper"] = hyper;
  j["hyper_search"] = c.hyper_search;
  if (c.hyper_search) {
    j["search_learning_rates"] = c.search_learning_rates;
    j["search_dropouts"] = c.search_dropouts;
  }
  j["seeds"] = c.seeds;
  j["per_validator_negatives"] = c.per_validator_negatives;
  j["validator_replicas"] = c.validator_replicas;
  return j;
}

std::vector<std::size_t> parse_size_list(std::string_view text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(to_count("list", item));
  if (out.empty()) throw Error("empty list");
  return out;
}

SyntheticSpec parse_synthetic_spec(std::istream& in) {
  SyntheticSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw Error("synthetic spec: expected key = value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    if (key == "users") {
      spec.num_users = to_count(key, value);
    } else if (key == "edges") {
      spec.num_edges = to_count(key, value);
    } else if (key == "T") {
      spec.slices = static_cast<int>(to_integer(key, value));
    } else if (key == "model") {
      auto model = parse_synthetic_model(value);
      if (!model) throw Error("model must be uniform, preferential or community");
      spec.model = *model;
    } else if (key == "seed") {
      spec.seed = to_count(key, value);
    } else if (key == "communities") {
      spec.communities = to_count(key, value);
    } else if (key == "intra") {
      spec.intra_probability = to_double(key, value);
    } else if (key == "repeat") {
      spec.repeat_probability = to_double(key, value);
    } else {
      throw Error("unknown synthetic spec key '" + key + "'");
    }
  }
  return spec;
}

}  // namespace desocial
