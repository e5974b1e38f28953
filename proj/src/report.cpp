#include "desocial/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace desocial {

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

nlohmann::json method_json(const MethodSpec& m) {
  return {{"name", m.name},
          {"strategy", to_string(m.strategy)},
          {"pool", pool_to_string(m.pool)},
          {"n", m.committee_size}};
}

nlohmann::json hyper_json(const TrainingHyper& h) {
  return {{"learning_rate", h.learning_rate}, {"dropout", h.dropout}, {"epochs", h.epochs},
          {"patience", h.patience},           {"embed_dim", h.embed_dim}};
}

nlohmann::json seed_json(const SeedResult& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [name, report] : r.accuracy) {
    nlohmann::json overall = nlohmann::json::object();
    for (const auto& [k, acc] : report.overall()) overall[std::to_string(k)] = acc;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [key, cell] : report.cells()) {
      rows.push_back({{"period", key.first},
                      {"K", key.second},
                      {"accuracy", cell.accuracy()},
                      {"correct", cell.correct},
                      {"total", cell.total}});
    }
    methods[name] = {{"overall", overall}, {"per_period", rows}};
  }
  j["methods"] = methods;

  nlohmann::json agreement = nlohmann::json::array();
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& cell = r.agreement.per_quartile[q];
    const auto p = cell.proportion();
    agreement.push_back({{"quartile", q + 1},
                         {"accepted", cell.accepted},
                         {"unanimous", cell.unanimous},
                         {"proportion", p ? nlohmann::json(*p) : nlohmann::json(nullptr)}});
  }
  j["agreement"] = agreement;

  nlohmann::json periods = nlohmann::json::array();
  for (const auto& p : r.periods) {
    periods.push_back({{"period", p.period},
                       {"queries", p.queries},
                       {"skipped_queries", p.skipped},
                       {"self_validation", p.self_validation},
                       {"validators", p.validator_set.size()}});
  }
  j["periods"] = periods;
  if (!r.searched.empty()) {
    nlohmann::json searched;
    for (const auto& [kind, h] : r.searched) searched[std::string(to_string(kind))] = hyper_json(h);
    j["searched_hyper"] = searched;
  }
  return j;
}

std::string acc_csv(const RunBundle& bundle) {
  std::ostringstream out;
  out << "seed,period,K,method,accuracy,query_count\n";
  for (const auto& r : bundle.seeds) {
    for (const auto& record : r.periods) {
      for (int k : bundle.config.ks) {
        for (const auto& m : bundle.methods) {
          const auto& cell = r.accuracy.at(m.name).cells().at({record.period, k});
          out << r.seed << ',' << record.period << ',' << k << ',' << m.name << ',' << fmt(cell.accuracy())
              << ',' << cell.total << '\n';
        }
      }
    }
  }
  return out.str();
}

std::string agreement_csv(const RunBundle& bundle) {
  std::ostringstream out;
  out << "seed,quartile,proportion,accepted_count,unanimous_count\n";
  for (const auto& r : bundle.seeds) {
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& cell = r.agreement.per_quartile[q];
      const auto p = cell.proportion();
      out << r.seed << ',' << q + 1 << ',' << (p ? fmt(*p) : "") << ',' << cell.accepted << ','
          << cell.unanimous << '\n';
    }
  }
  return out.str();
}

std::string pool_sweep_csv(const RunBundle& bundle) {
  std::ostringstream out;
  out << "subset,K,accuracy,improved\n";
  for (const auto& row : bundle.pool_sweep) {
    for (const auto& [k, acc] : row.accuracy) {
      out << pool_to_string(row.subset) << ',' << k << ',' << fmt(acc) << ',' << (row.improved ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string gain_csv(const RunBundle& bundle) {
  std::ostringstream out;
  out << "n,mean_gain\n";
  for (const auto& point : bundle.gain) out << point.n << ',' << fmt(point.mean_gain) << '\n';
  return out.str();
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

nlohmann::json report_json(const RunBundle& bundle) {
  nlohmann::json j;
  j["config"] = to_json(bundle.config);
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : bundle.methods) methods.push_back(method_json(m));
  j["methods"] = methods;

  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : bundle.seeds) seeds.push_back(seed_json(r));
  j["per_seed"] = seeds;

  // mean and sample standard deviation of overall Acc@K across seeds
  nlohmann::json aggregate = nlohmann::json::object();
  for (const auto& m : bundle.methods) {
    std::map<int, std::vector<double>> values;
    for (const auto& r : bundle.seeds) {
      for (const auto& [k, acc] : r.accuracy.at(m.name).overall()) values[k].push_back(acc);
    }
    nlohmann::json per_k = nlohmann::json::object();
    for (const auto& [k, v] : values) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double stddev = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      per_k[std::to_string(k)] = {{"mean", mean}, {"std", stddev}};
    }
    aggregate[m.name] = per_k;
  }
  j["aggregate"] = aggregate;

  if (!bundle.pool_sweep.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : bundle.pool_sweep) {
      nlohmann::json acc = nlohmann::json::object();
      for (const auto& [k, a] : row.accuracy) acc[std::to_string(k)] = a;
      rows.push_back({{"subset", pool_to_string(row.subset)}, {"accuracy", acc}, {"improved", row.improved}});
    }
    j["pool_sweep"] = rows;
  }
  if (!bundle.gain.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : bundle.gain) {
      nlohmann::json consensus = nlohmann::json::object();
      nlohmann::json single = nlohmann::json::object();
      for (const auto& [k, a] : p.consensus) consensus[std::to_string(k)] = a;
      for (const auto& [k, a] : p.single) single[std::to_string(k)] = a;
      rows.push_back({{"n", p.n}, {"mean_gain", p.mean_gain}, {"consensus", consensus}, {"single", single}});
    }
    j["gain_vs_n"] = rows;
  }
  return j;
}

void emit_report(const RunBundle& bundle, const std::filesystem::path& output_dir, const Dataset* data) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec || !std::filesystem::is_directory(output_dir)) {
    throw Error("cannot create output directory " + output_dir.string());
  }
  std::vector<std::string> files;
  auto put = [&](const std::string& name, std::string_view content) {
    write_atomic(output_dir / name, content);
    files.push_back(name);
  };

  put("acc.csv", acc_csv(bundle));
  put("agreement.csv", agreement_csv(bundle));
  if (!bundle.pool_sweep.empty()) put("pool_sweep.csv", pool_sweep_csv(bundle));
  if (!bundle.gain.empty()) put("gain_vs_n.csv", gain_csv(bundle));
  put("report.json", report_json(bundle).dump(2) + "\n");

  for (const auto& r : bundle.seeds) {
    if (bundle.config.verification_log) {
      std::ostringstream log;
      write_verification_log(r.verification, log);
      put("verification_seed" + std::to_string(r.seed) + ".ndjson", log.str());
    }
    if (!r.assignments.empty()) {
      std::filesystem::create_directories(output_dir / "assignments", ec);
      if (ec) throw Error("cannot create assignments directory");
      for (const auto& [period, assignment] : r.assignments) {
        std::ostringstream csv;
        write_assignment_csv(assignment, csv);
        put("assignments/seed" + std::to_string(r.seed) + "_period" + std::to_string(period) + ".csv",
            csv.str());
      }
    }
  }
  if (data != nullptr && !data->tokens.empty()) {
    std::ostringstream ids;
    ids << "token,id\n";
    for (std::size_t i = 0; i < data->tokens.size(); ++i) ids << data->tokens[i] << ',' << i << '\n';
    put("ids.csv", ids.str());
  }

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json(bundle.config).dump())));
  nlohmann::json manifest;
  manifest["config_hash"] = hash;
  manifest["seeds"] = bundle.config.seeds;
  manifest["seconds"] = bundle.seconds;
  manifest["threads"] = bundle.config.threads;
  manifest["files"] = files;
  write_atomic(output_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace desocial
