#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "migh/registry.hpp"
#include "migh/table.hpp"

namespace migh {

/// Directed weighted interstate flow graph of one decade.
struct MigrationNetwork {
  Decade decade = 0;
  std::vector<EntityId> nodes;  // canonical order
  std::map<std::pair<EntityId, EntityId>, double> edges;  // (origin, destination) -> weight > 0
  std::optional<std::map<EntityId, int>> communities;
  std::uint64_t detection_seed = 0;
  double resolution = 1.0;
};

/// One node per entity appearing as interstate origin or destination; edge weight is the row
/// total, or a single duration bin when `bin` is given. Zero-weight pairs are omitted.
MigrationNetwork build_network(const MigrationTable& table,
                               std::optional<DurationBin> bin = std::nullopt);

struct NetworkMetrics {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double total_weight = 0;
  double average_edge_weight = 0;
  EntityId top_in_strength;   // ties go to the smaller id
  EntityId top_out_strength;
};

NetworkMetrics network_metrics(const MigrationNetwork& net);

/// Undirected weighted graph over dense node indices. Self-loops are stored once.
class UndirectedGraph {
 public:
  explicit UndirectedGraph(std::size_t n = 0) : adjacency_(n) {}
  /// Accumulates weight on {u, v}; u == v adds to the self-loop.
  void add_edge(std::size_t u, std::size_t v, double w);
  std::size_t size() const noexcept { return adjacency_.size(); }
  const std::vector<std::pair<std::size_t, double>>& neighbours(std::size_t u) const { return adjacency_[u]; }
  double self_loop(std::size_t u) const;
  double degree(std::size_t u) const;
  /// Sum of all degrees (twice the undirected edge weight).
  double total_degree() const;

 private:
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
};

/// Symmetrised graph: weight(u, v) = w(u -> v) + w(v -> u), node order = net.nodes.
UndirectedGraph symmetrize(const MigrationNetwork& net);

struct Partition {
  std::vector<int> community;  // per node, contiguous labels from 0 in first-appearance order
  int count = 0;
  double modularity = 0;
};

/// Newman-Girvan modularity with a resolution parameter.
double modularity(const UndirectedGraph& g, const std::vector<int>& community, double resolution = 1.0);

/// Multi-level Louvain modularity maximisation; node visiting order is a seeded shuffle.
Partition louvain(const UndirectedGraph& g, double resolution, std::uint64_t seed);

/// Runs Louvain on the symmetrised network and attaches the community map.
MigrationNetwork detect_communities(const MigrationNetwork& net, double resolution, std::uint64_t seed);

struct SeedSweep {
  std::vector<int> counts;  // community count per seed, seeds base..base+n-1
  int modal_count = 0;      // most frequent count, ties to the smaller count
  std::uint64_t representative_seed = 0;  // first seed reaching the modal count
  MigrationNetwork network;               // communities from the representative seed
};

SeedSweep sweep_communities(const MigrationNetwork& net, double resolution, std::size_t seeds,
                            std::uint64_t base_seed = 0);

struct PartitionSimilarity {
  double score = 0;  // adjusted Rand index clamped to [0, 1]
  std::size_t common_nodes = 0;
};

/// Adjusted-for-chance agreement on the intersection of the two node sets.
PartitionSimilarity compare_partitions(const std::map<EntityId, int>& a, const std::map<EntityId, int>& b);

/// CSV: decade,origin,destination,weight,community_of_origin (empty when undetected).
void write_edge_list(std::ostream& out, const MigrationNetwork& net, const EntityRegistry& registry);

}  // namespace migh
