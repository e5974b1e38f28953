#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "desocial/rng.hpp"
#include "desocial/types.hpp"

namespace desocial {

struct TimestampedEdge {
  UserId src = 0;
  UserId dst = 0;
  std::int64_t timestamp = 0;
  std::uint64_t ingest_index = 0;

  friend bool operator==(const TimestampedEdge&, const TimestampedEdge&) = default;
};

struct IngestResult {
  /// Sorted by (timestamp, ingest_index); self-loops removed.
  std::vector<TimestampedEdge> edges;
  /// tokens[id] is the original token for dense id `id`.
  std::vector<std::string> tokens;
  std::size_t self_loops_dropped = 0;

  std::size_t num_users() const { return tokens.size(); }
};

/// Parses `src dst timestamp` records separated by whitespace or commas.
/// Lines starting with '#' and blank lines are skipped. Throws Error with the
/// 1-based line number on malformed records, and "no edges" on empty input.
IngestResult ingest_edge_list(std::istream& in);
IngestResult ingest_edge_list_file(const std::string& path);

/// Writes the `token,id` sidecar table.
void write_id_map(const IngestResult& ingest, std::ostream& out);

using EdgePair = std::pair<UserId, UserId>;

struct Snapshot {
  Period index = 0;
  /// Deduplicated directed (src, dst) pairs, sorted.
  std::vector<EdgePair> edges;
  /// Sorted users touching at least one edge.
  std::vector<UserId> users;
  /// Edge count before deduplication.
  std::size_t raw_edge_count = 0;
};

inline std::uint64_t undirected_key(UserId a, UserId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

class SnapshotSequence {
 public:
  SnapshotSequence() = default;
  SnapshotSequence(std::vector<Snapshot> snapshots, std::size_t num_users,
                   std::unordered_map<std::uint64_t, std::vector<Period>> occurrences);

  std::size_t size() const { return snapshots_.size(); }
  std::size_t num_users() const { return num_users_; }
  const Snapshot& at(Period t) const;
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }

  /// Latest period <= `upto` in which {a, b} occurred (either direction).
  std::optional<Period> last_seen(UserId a, UserId b, Period upto) const;
  /// Latest period in which {a, b} occurred at all.
  std::optional<Period> last_seen(UserId a, UserId b) const;

 private:
  std::vector<Snapshot> snapshots_;
  std::size_t num_users_ = 0;
  // undirected pair -> sorted distinct periods of occurrence
  std::unordered_map<std::uint64_t, std::vector<Period>> occurrences_;
};

/// Splits a (timestamp, ingest_index)-sorted edge stream into `slices`
/// contiguous chunks whose sizes differ by at most one (larger chunks first).
SnapshotSequence partition_slices(std::span<const TimestampedEdge> edges, int slices,
                                  std::size_t num_users);

/// Undirected, deduplicated adjacency over the union of snapshots 0..upto, in
/// CSR form with sorted neighbor lists.
class CumulativeView {
 public:
  CumulativeView() = default;
  /// Builds a view from arbitrary (possibly directed, duplicated) pairs.
  CumulativeView(std::size_t num_users, std::span<const EdgePair> pairs, Period upto = 0);

  Period upto() const { return upto_; }
  std::size_t num_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t degree(UserId u) const { return offsets_[u + 1] - offsets_[u]; }
  std::span<const UserId> neighbors(UserId u) const {
    return {targets_.data() + offsets_[u], targets_.data() + offsets_[u + 1]};
  }
  bool has_edge(UserId u, UserId v) const;
  /// Number of undirected edges.
  std::size_t num_edges() const { return targets_.size() / 2; }

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<UserId>& targets() const { return targets_; }

 private:
  Period upto_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<UserId> targets_;
};

CumulativeView cumulative_view(const SnapshotSequence& seq, Period t);

struct NodeStats {
  UserId user = 0;
  std::size_t degree = 0;
  double clustering = 0.0;
};

NodeStats clustering_coefficient(const CumulativeView& view, UserId u);

/// Draws `k` distinct users uniformly from those outside N(src), `exclude`
/// and {src}. Throws Error("negative pool exhausted") when fewer exist.
std::vector<UserId> sample_negatives(const CumulativeView& view, UserId src, std::size_t k,
                                     std::span<const UserId> exclude, Rng& rng);

/// Sorts users by (degree, id) and cuts them into four contiguous groups;
/// element 0 holds the lowest degrees.
std::array<std::vector<UserId>, 4> quartile_partition(const CumulativeView& view,
                                                      std::span<const UserId> users);

enum class SyntheticModel { Uniform, Preferential, Community };

std::optional<SyntheticModel> parse_synthetic_model(std::string_view text);

struct SyntheticSpec {
  std::size_t num_users = 200;
  std::size_t num_edges = 4000;
  int slices = 10;
  SyntheticModel model = SyntheticModel::Community;
  std::uint64_t seed = 1;
  // Community model only.
  std::size_t communities = 4;
  double intra_probability = 0.85;
  double repeat_probability = 0.5;
};

/// Edge stream with strictly increasing timestamps (timestamp == position).
std::vector<TimestampedEdge> generate_synthetic_edges(const SyntheticSpec& spec);
SnapshotSequence generate_synthetic(const SyntheticSpec& spec);

}  // namespace desocial
