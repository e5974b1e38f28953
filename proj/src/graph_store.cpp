#include "desocial/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace desocial {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool parse_int64(std::string_view text, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

IngestResult ingest_edge_list(std::istream& in) {
  IngestResult result;
  std::unordered_map<std::string, UserId> ids;
  auto id_of = [&](std::string_view token) {
    auto [it, inserted] = ids.try_emplace(std::string(token), static_cast<UserId>(ids.size()));
    if (inserted) result.tokens.emplace_back(token);
    return it->second;
  };

  std::string line;
  std::size_t line_number = 0;
  std::uint64_t ingest_index = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view(line);
    const auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || view[first] == '#') continue;
    const auto fields = split_fields(view);
    std::int64_t timestamp = 0;
    if (fields.size() < 3 || !parse_int64(fields[2], timestamp)) {
      throw Error("malformed edge record at line " + std::to_string(line_number));
    }
    if (fields[0] == fields[1]) {
      ++result.self_loops_dropped;
      continue;
    }
    const UserId src = id_of(fields[0]);
    const UserId dst = id_of(fields[1]);
    result.edges.push_back({src, dst, timestamp, ingest_index++});
  }
  if (result.edges.empty()) throw Error("no edges");
  std::stable_sort(result.edges.begin(), result.edges.end(),
                   [](const TimestampedEdge& a, const TimestampedEdge& b) {
                     return a.timestamp < b.timestamp ||
                            (a.timestamp == b.timestamp && a.ingest_index < b.ingest_index);
                   });
  return result;
}

IngestResult ingest_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list: " + path);
  return ingest_edge_list(in);
}

void write_id_map(const IngestResult& ingest, std::ostream& out) {
  out << "token,id\n";
  for (std::size_t id = 0; id < ingest.tokens.size(); ++id) {
    out << ingest.tokens[id] << ',' << id << '\n';
  }
}

SnapshotSequence::SnapshotSequence(
    std::vector<Snapshot> snapshots, std::size_t num_users,
    std::unordered_map<std::uint64_t, std::vector<Period>> occurrences)
    : snapshots_(std::move(snapshots)),
      num_users_(num_users),
      occurrences_(std::move(occurrences)) {}

const Snapshot& SnapshotSequence::at(Period t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= snapshots_.size()) {
    throw Error("period " + std::to_string(t) + " out of range");
  }
  return snapshots_[static_cast<std::size_t>(t)];
}

std::optional<Period> SnapshotSequence::last_seen(UserId a, UserId b, Period upto) const {
  auto it = occurrences_.find(undirected_key(a, b));
  if (it == occurrences_.end()) return std::nullopt;
  const auto& periods = it->second;
  auto pos = std::upper_bound(periods.begin(), periods.end(), upto);
  if (pos == periods.begin()) return std::nullopt;
  return *std::prev(pos);
}

std::optional<Period> SnapshotSequence::last_seen(UserId a, UserId b) const {
  auto it = occurrences_.find(undirected_key(a, b));
  if (it == occurrences_.end()) return std::nullopt;
  return it->second.back();
}

SnapshotSequence partition_slices(std::span<const TimestampedEdge> edges, int slices,
                                  std::size_t num_users) {
  if (slices < 2) throw Error("slice count must be >= 2");
  if (static_cast<std::size_t>(slices) > edges.size()) throw Error("too many slices");

  const std::size_t total = edges.size();
  const std::size_t base = total / static_cast<std::size_t>(slices);
  const std::size_t extra = total % static_cast<std::size_t>(slices);

  std::vector<Snapshot> snapshots;
  snapshots.reserve(static_cast<std::size_t>(slices));
  std::unordered_map<std::uint64_t, std::vector<Period>> occurrences;

  std::size_t begin = 0;
  for (int t = 0; t < slices; ++t) {
    const std::size_t size = base + (static_cast<std::size_t>(t) < extra ? 1 : 0);
    Snapshot snap;
    snap.index = t;
    snap.raw_edge_count = size;
    snap.edges.reserve(size);
    for (std::size_t i = begin; i < begin + size; ++i) {
      const auto& e = edges[i];
      if (e.src >= num_users || e.dst >= num_users) throw Error("edge endpoint exceeds user count");
      snap.edges.emplace_back(e.src, e.dst);
      auto& periods = occurrences[undirected_key(e.src, e.dst)];
      if (periods.empty() || periods.back() != t) periods.push_back(t);
    }
    std::sort(snap.edges.begin(), snap.edges.end());
    snap.edges.erase(std::unique(snap.edges.begin(), snap.edges.end()), snap.edges.end());
    for (const auto& [s, d] : snap.edges) {
      snap.users.push_back(s);
      snap.users.push_back(d);
    }
    std::sort(snap.users.begin(), snap.users.end());
    snap.users.erase(std::unique(snap.users.begin(), snap.users.end()), snap.users.end());
    snapshots.push_back(std::move(snap));
    begin += size;
  }
  return SnapshotSequence(std::move(snapshots), num_users, std::move(occurrences));
}

CumulativeView::CumulativeView(std::size_t num_users, std::span<const EdgePair> pairs, Period upto)
    : upto_(upto) {
  std::vector<EdgePair> directed;
  directed.reserve(pairs.size() * 2);
  for (const auto& [a, b] : pairs) {
    if (a >= num_users || b >= num_users) throw Error("edge endpoint exceeds user count");
    if (a == b) continue;
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  offsets_.assign(num_users + 1, 0);
  for (const auto& [a, b] : directed) ++offsets_[a + 1];
  for (std::size_t u = 0; u < num_users; ++u) offsets_[u + 1] += offsets_[u];
  targets_.reserve(directed.size());
  for (const auto& [a, b] : directed) targets_.push_back(b);
}

bool CumulativeView::has_edge(UserId u, UserId v) const {
  if (u >= num_users() || v >= num_users()) return false;
  auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

CumulativeView cumulative_view(const SnapshotSequence& seq, Period t) {
  if (t < 0 || static_cast<std::size_t>(t) >= seq.size()) {
    throw Error("cumulative view period " + std::to_string(t) + " out of range");
  }
  std::vector<EdgePair> pairs;
  for (Period tau = 0; tau <= t; ++tau) {
    const auto& edges = seq.at(tau).edges;
    pairs.insert(pairs.end(), edges.begin(), edges.end());
  }
  return CumulativeView(seq.num_users(), pairs, t);
}

NodeStats clustering_coefficient(const CumulativeView& view, UserId u) {
  NodeStats stats;
  stats.user = u;
  if (u >= view.num_users()) throw Error("user id out of range");
  stats.degree = view.degree(u);
  if (stats.degree <= 1) return stats;

  // Each edge among N(u) is found from both endpoints.
  const auto nbrs = view.neighbors(u);
  std::size_t twice_links = 0;
  for (UserId v : nbrs) {
    const auto other = view.neighbors(v);
    auto a = nbrs.begin();
    auto b = other.begin();
    while (a != nbrs.end() && b != other.end()) {
      if (*a < *b) {
        ++a;
      } else if (*b < *a) {
        ++b;
      } else {
        ++twice_links;
        ++a;
        ++b;
      }
    }
  }
  const double d = static_cast<double>(stats.degree);
  stats.clustering = static_cast<double>(twice_links) / (d * (d - 1.0));
  return stats;
}

std::vector<UserId> sample_negatives(const CumulativeView& view, UserId src, std::size_t k,
                                     std::span<const UserId> exclude, Rng& rng) {
  const std::size_t n = view.num_users();
  if (src >= n) throw Error("user id out of range");
  if (k == 0) throw Error("negative count must be >= 1");

  std::vector<UserId> blocked(view.neighbors(src).begin(), view.neighbors(src).end());
  for (UserId x : exclude) {
    if (x < n) blocked.push_back(x);
  }
  blocked.push_back(src);
  std::sort(blocked.begin(), blocked.end());
  blocked.erase(std::unique(blocked.begin(), blocked.end()), blocked.end());

  const std::size_t eligible = n - blocked.size();
  if (eligible < k) throw Error("negative pool exhausted");

  std::vector<UserId> out;
  out.reserve(k);
  if (eligible >= 4 * k) {
    while (out.size() < k) {
      const auto cand = static_cast<UserId>(uniform_below(rng, n));
      if (std::binary_search(blocked.begin(), blocked.end(), cand)) continue;
      if (std::find(out.begin(), out.end(), cand) != out.end()) continue;
      out.push_back(cand);
    }
    return out;
  }

  std::vector<UserId> pool;
  pool.reserve(eligible);
  auto bit = blocked.begin();
  for (UserId u = 0; u < n; ++u) {
    if (bit != blocked.end() && *bit == u) {
      ++bit;
      continue;
    }
    pool.push_back(u);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

std::array<std::vector<UserId>, 4> quartile_partition(const CumulativeView& view,
                                                      std::span<const UserId> users) {
  if (users.size() < 4) throw Error("quartile partition needs at least 4 users");
  std::vector<UserId> sorted(users.begin(), users.end());
  std::sort(sorted.begin(), sorted.end(), [&](UserId a, UserId b) {
    const auto da = view.degree(a);
    const auto db = view.degree(b);
    return da < db || (da == db && a < b);
  });
  std::array<std::vector<UserId>, 4> groups;
  const std::size_t base = sorted.size() / 4;
  const std::size_t extra = sorted.size() % 4;
  std::size_t begin = 0;
  for (std::size_t g = 0; g < 4; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    groups[g].assign(sorted.begin() + static_cast<std::ptrdiff_t>(begin),
                     sorted.begin() + static_cast<std::ptrdiff_t>(begin + size));
    begin += size;
  }
  return groups;
}

std::optional<SyntheticModel> parse_synthetic_model(std::string_view text) {
  if (text == "uniform" || text == "uniform-random") return SyntheticModel::Uniform;
  if (text == "preferential") return SyntheticModel::Preferential;
  if (text == "community") return SyntheticModel::Community;
  return std::nullopt;
}

namespace {

UserId draw_distinct(Rng& rng, std::size_t n, UserId avoid) {
  UserId v = static_cast<UserId>(uniform_below(rng, n - 1));
  return v >= avoid ? v + 1 : v;
}

}  // namespace

std::vector<TimestampedEdge> generate_synthetic_edges(const SyntheticSpec& spec) {
  if (spec.num_users < 4) throw Error("synthetic graph needs at least 4 users");
  if (spec.slices < 2 || spec.num_edges < static_cast<std::size_t>(spec.slices)) {
    throw Error("synthetic edge count must be >= slice count >= 2");
  }
  Rng rng = make_stream(spec.seed, StreamTag::Synthetic);
  const std::size_t n = spec.num_users;
  std::vector<TimestampedEdge> edges;
  edges.reserve(spec.num_edges);

  auto push = [&](UserId s, UserId d) {
    const auto i = edges.size();
    edges.push_back({s, d, static_cast<std::int64_t>(i), i});
  };

  switch (spec.model) {
    case SyntheticModel::Uniform:
      for (std::size_t i = 0; i < spec.num_edges; ++i) {
        const auto s = static_cast<UserId>(uniform_below(rng, n));
        push(s, draw_distinct(rng, n, s));
      }
      break;
    case SyntheticModel::Preferential: {
      // Endpoints of earlier edges, so a draw from this list is degree-biased.
      std::vector<UserId> endpoints;
      endpoints.reserve(2 * spec.num_edges);
      auto pick = [&]() -> UserId {
        if (endpoints.empty() || uniform01(rng) < 0.2) {
          return static_cast<UserId>(uniform_below(rng, n));
        }
        return endpoints[uniform_below(rng, endpoints.size())];
      };
      while (edges.size() < spec.num_edges) {
        const UserId s = pick();
        const UserId d = pick();
        if (s == d) continue;
        push(s, d);
        endpoints.push_back(s);
        endpoints.push_back(d);
      }
      break;
    }
    case SyntheticModel::Community: {
      if (spec.communities == 0 || spec.communities > n) throw Error("invalid community count");
      // Zipf-like activity so degrees are heterogeneous.
      std::vector<double> cumulative(n);
      double acc = 0.0;
      for (std::size_t u = 0; u < n; ++u) {
        acc += 1.0 / std::pow(static_cast<double>(u % 97 + 1), 0.8);
        cumulative[u] = acc;
      }
      auto active_user = [&]() {
        const double x = uniform01(rng) * acc;
        return static_cast<UserId>(std::upper_bound(cumulative.begin(), cumulative.end(), x) -
                                   cumulative.begin());
      };
      const std::size_t c = spec.communities;
      const std::size_t window = std::max<std::size_t>(
          1, 3 * spec.num_edges / static_cast<std::size_t>(spec.slices));
      while (edges.size() < spec.num_edges) {
        if (!edges.empty() && uniform01(rng) < spec.repeat_probability) {
          const std::size_t span = std::min(window, edges.size());
          const auto& old = edges[edges.size() - 1 - uniform_below(rng, span)];
          if (uniform01(rng) < 0.5) {
            push(old.src, old.dst);
          } else {
            push(old.dst, old.src);
          }
          continue;
        }
        const UserId s = std::min<UserId>(active_user(), static_cast<UserId>(n - 1));
        UserId d = 0;
        if (uniform01(rng) < spec.intra_probability) {
          const std::size_t members = (n - s % c + c - 1) / c;
          if (members < 2) continue;
          d = static_cast<UserId>(s % c + c * uniform_below(rng, members));
          if (d == s) continue;
        } else {
          d = draw_distinct(rng, n, s);
        }
        push(s, d);
      }
      break;
    }
  }
  return edges;
}

SnapshotSequence generate_synthetic(const SyntheticSpec& spec) {
  const auto edges = generate_synthetic_edges(spec);
  return partition_slices(edges, spec.slices, spec.num_users);
}

}  // namespace desocial
