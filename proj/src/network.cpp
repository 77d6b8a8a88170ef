#include "migh/network.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "migh/csv.hpp"
#include "migh/error.hpp"

namespace migh {

MigrationNetwork build_network(const MigrationTable& table, std::optional<DurationBin> bin) {
  MigrationNetwork net;
  net.decade = table.decade();
  std::set<EntityId> nodes;
  for (const auto& [key, row] : table.rows()) {
    if (!key.origin.is_interstate()) continue;
    nodes.insert(key.origin.entity);
    nodes.insert(key.destination);
    double w = 0;
    if (!bin || *bin == DurationBin::Total) {
      w = row.sum();
    } else {
      w = row.get(*bin);
    }
    if (w > 0) net.edges[{key.origin.entity, key.destination}] += w;
  }
  net.nodes.assign(nodes.begin(), nodes.end());
  return net;
}

NetworkMetrics network_metrics(const MigrationNetwork& net) {
  NetworkMetrics m;
  m.nodes = net.nodes.size();
  m.edges = net.edges.size();
  std::map<EntityId, double> in;
  std::map<EntityId, double> out;
  for (const auto& [e, w] : net.edges) {
    m.total_weight += w;
    out[e.first] += w;
    in[e.second] += w;
  }
  if (m.edges > 0) m.average_edge_weight = m.total_weight / static_cast<double>(m.edges);
  auto top = [](const std::map<EntityId, double>& s) {
    EntityId best;
    double best_w = -1;
    for (const auto& [id, w] : s)
      if (w > best_w) {
        best = id;
        best_w = w;
      }
    return best;
  };
  m.top_in_strength = top(in);
  m.top_out_strength = top(out);
  return m;
}

void UndirectedGraph::add_edge(std::size_t u, std::size_t v, double w) {
  auto bump = [&](std::size_t a, std::size_t b) {
    auto& list = adjacency_[a];
    for (auto& [n, x] : list)
      if (n == b) {
        x += w;
        return;
      }
    list.emplace_back(b, w);
  };
  bump(u, v);
  if (u != v) bump(v, u);
}

double UndirectedGraph::self_loop(std::size_t u) const {
  for (const auto& [n, w] : adjacency_[u])
    if (n == u) return w;
  return 0.0;
}

double UndirectedGraph::degree(std::size_t u) const {
  double d = 0;
  for (const auto& [_, w] : adjacency_[u]) d += w;
  return d;
}

double UndirectedGraph::total_degree() const {
  double t = 0;
  for (std::size_t u = 0; u < size(); ++u) t += degree(u);
  return t;
}

UndirectedGraph symmetrize(const MigrationNetwork& net) {
  std::map<EntityId, std::size_t> index;
  for (std::size_t k = 0; k < net.nodes.size(); ++k) index[net.nodes[k]] = k;
  UndirectedGraph g(net.nodes.size());
  for (const auto& [e, w] : net.edges) g.add_edge(index.at(e.first), index.at(e.second), w);
  return g;
}

namespace {

std::vector<int> relabel_contiguous(const std::vector<std::size_t>& raw) {
  std::map<std::size_t, int> labels;
  std::vector<int> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    auto [it, _] = labels.try_emplace(raw[k], static_cast<int>(labels.size()));
    out[k] = it->second;
  }
  return out;
}

// Unbiased integer in [0, n) from the standardised mt19937_64 stream.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % n;
  }
}

constexpr double kMinGain = 1e-12;
constexpr double kMinImprovement = 1e-7;

class LocalMoving {
 public:
  LocalMoving(const UndirectedGraph& g, double resolution)
      : g_(g), resolution_(resolution), m2_(g.total_degree()), n2c_(g.size()), tot_(g.size()),
        in_(g.size()), k_(g.size()), loop_(g.size()), neigh_w_(g.size(), 0.0) {
    for (std::size_t u = 0; u < g.size(); ++u) {
      n2c_[u] = u;
      k_[u] = g.degree(u);
      loop_[u] = g.self_loop(u);
      tot_[u] = k_[u];
      in_[u] = loop_[u];
    }
  }

  double modularity() const {
    double q = 0;
    for (std::size_t c = 0; c < tot_.size(); ++c)
      if (tot_[c] > 0) q += in_[c] / m2_ - resolution_ * (tot_[c] / m2_) * (tot_[c] / m2_);
    return q;
  }

  /// Returns true if any node changed community.
  bool run(std::mt19937_64& rng) {
    std::vector<std::size_t> order(g_.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);

    bool moved_any = false;
    double current = modularity();
    for (;;) {
      std::size_t moves = 0;
      for (std::size_t node : order) {
        const std::size_t old_c = n2c_[node];
        touched_.clear();
        touched_.push_back(old_c);
        neigh_w_[old_c] = 0;
        for (const auto& [nb, w] : g_.neighbours(node)) {
          if (nb == node) continue;
          const std::size_t c = n2c_[nb];
          if (std::find(touched_.begin(), touched_.end(), c) == touched_.end()) {
            touched_.push_back(c);
            neigh_w_[c] = 0;
          }
          neigh_w_[c] += w;
        }
        tot_[old_c] -= k_[node];
        in_[old_c] -= 2 * neigh_w_[old_c] + loop_[node];

        std::size_t best = old_c;
        double best_gain = 0;
        for (std::size_t c : touched_) {
          const double gain = (neigh_w_[c] - resolution_ * tot_[c] * k_[node] / m2_) / m2_;
          if (gain > best_gain + kMinGain) {
            best = c;
            best_gain = gain;
          }
        }
        tot_[best] += k_[node];
        in_[best] += 2 * neigh_w_[best] + loop_[node];
        n2c_[node] = best;
        if (best != old_c) ++moves;
      }
      if (moves > 0) moved_any = true;
      const double next = modularity();
      const bool keep_going = moves > 0 && next - current > kMinImprovement;
      current = next;
      if (!keep_going) break;
    }
    return moved_any;
  }

  const std::vector<std::size_t>& assignment() const { return n2c_; }

 private:
  const UndirectedGraph& g_;
  double resolution_;
  double m2_;
  std::vector<std::size_t> n2c_;
  std::vector<double> tot_, in_, k_, loop_, neigh_w_;
  std::vector<std::size_t> touched_;
};

UndirectedGraph aggregate(const UndirectedGraph& g, const std::vector<int>& comm, int count) {
  UndirectedGraph out(static_cast<std::size_t>(count));
  for (std::size_t u = 0; u < g.size(); ++u) {
    for (const auto& [v, w] : g.neighbours(u)) {
      const auto cu = static_cast<std::size_t>(comm[u]);
      const auto cv = static_cast<std::size_t>(comm[v]);
      // Internal links land on the self-loop from both endpoints' lists (ordered-pair weight);
      // external links are added once.
      if (cu == cv) {
        out.add_edge(cu, cu, w);
      } else if (u < v) {
        out.add_edge(cu, cv, w);
      }
    }
  }
  return out;
}

}  // namespace

double modularity(const UndirectedGraph& g, const std::vector<int>& community, double resolution) {
  const double m2 = g.total_degree();
  if (m2 == 0) return 0.0;
  std::map<int, double> in, tot;
  for (std::size_t u = 0; u < g.size(); ++u) {
    tot[community[u]] += g.degree(u);
    for (const auto& [v, w] : g.neighbours(u))
      if (community[u] == community[v]) in[community[u]] += w;
  }
  double q = 0;
  for (const auto& [c, t] : tot) q += in[c] / m2 - resolution * (t / m2) * (t / m2);
  return q;
}

Partition louvain(const UndirectedGraph& g, double resolution, std::uint64_t seed) {
  if (!(resolution > 0)) throw PreconditionError("resolution must be positive");
  Partition p;
  std::vector<std::size_t> membership(g.size());
  std::iota(membership.begin(), membership.end(), 0);
  if (g.total_degree() > 0) {
    std::mt19937_64 rng(seed);
    UndirectedGraph current = g;
    for (;;) {
      LocalMoving level(current, resolution);
      if (!level.run(rng)) break;
      const auto comm = relabel_contiguous(level.assignment());
      const int count = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
      for (auto& m : membership) m = static_cast<std::size_t>(comm[m]);
      if (static_cast<std::size_t>(count) == current.size()) break;
      current = aggregate(current, comm, count);
    }
  }
  p.community = relabel_contiguous(membership);
  p.count = p.community.empty() ? 0 : *std::max_element(p.community.begin(), p.community.end()) + 1;
  p.modularity = modularity(g, p.community, resolution);
  return p;
}

MigrationNetwork detect_communities(const MigrationNetwork& net, double resolution, std::uint64_t seed) {
  if (net.nodes.empty()) throw PreconditionError("cannot detect communities on an empty network");
  const Partition p = louvain(symmetrize(net), resolution, seed);
  MigrationNetwork out = net;
  out.resolution = resolution;
  out.detection_seed = seed;
  std::map<EntityId, int> comm;
  for (std::size_t k = 0; k < net.nodes.size(); ++k) comm[net.nodes[k]] = p.community[k];
  out.communities = std::move(comm);
  return out;
}

SeedSweep sweep_communities(const MigrationNetwork& net, double resolution, std::size_t seeds,
                            std::uint64_t base_seed) {
  if (seeds == 0) throw PreconditionError("seed sweep needs at least one seed");
  SeedSweep sweep;
  const UndirectedGraph g = symmetrize(net);
  std::map<int, std::size_t> freq;
  for (std::size_t k = 0; k < seeds; ++k) {
    const int c = louvain(g, resolution, base_seed + k).count;
    sweep.counts.push_back(c);
    ++freq[c];
  }
  std::size_t best = 0;
  for (const auto& [count, f] : freq)
    if (f > best) {
      best = f;
      sweep.modal_count = count;
    }
  for (std::size_t k = 0; k < seeds; ++k)
    if (sweep.counts[k] == sweep.modal_count) {
      sweep.representative_seed = base_seed + k;
      break;
    }
  sweep.network = detect_communities(net, resolution, sweep.representative_seed);
  return sweep;
}

PartitionSimilarity compare_partitions(const std::map<EntityId, int>& a, const std::map<EntityId, int>& b) {
  PartitionSimilarity sim;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [id, ca] : a)
    if (auto it = b.find(id); it != b.end()) pairs.emplace_back(ca, it->second);
  sim.common_nodes = pairs.size();
  if (pairs.size() < 2) {
    sim.score = 1.0;
    return sim;
  }
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  for (const auto& p : pairs) {
    joint[p] += 1;
    rows[p.first] += 1;
    cols[p.second] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [_, n] : joint) index += choose2(n);
  for (const auto& [_, n] : rows) sum_a += choose2(n);
  for (const auto& [_, n] : cols) sum_b += choose2(n);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(pairs.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) {
    // Both partitions are all-singletons or a single block: agreement is all-or-nothing.
    sim.score = (joint.size() == rows.size() && joint.size() == cols.size()) ? 1.0 : 0.0;
    return sim;
  }
  sim.score = std::clamp((index - expected) / (max_index - expected), 0.0, 1.0);
  return sim;
}

void write_edge_list(std::ostream& out, const MigrationNetwork& net, const EntityRegistry& registry) {
  out << "decade,origin,destination,weight,community_of_origin\n";
  for (const auto& [e, w] : net.edges) {
    out << net.decade << "," << csv::escape(registry.name_of(e.first)) << ","
        << csv::escape(registry.name_of(e.second)) << "," << csv::format_double(w) << ",";
    if (net.communities) {
      if (auto it = net.communities->find(e.first); it != net.communities->end()) out << it->second;
    }
    out << "\n";
  }
}

}  // namespace migh
