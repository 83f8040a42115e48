#pragma once

#include <algorithm>
#include <deque>
#include <istream>
#include <limits>
#include <set>
#include <sstream>
#include <stack>
#include <string>
#include <utility>
#include <vector>

#include "fairlab/common.hpp"

// Undirected simple graphs for the contact-network environment, plus the
// betweenness-based bipartition used to split a network into two communities.

namespace fairlab {

struct SocialGraph {
  int vertex_count = 0;
  std::vector<std::pair<int, int>> edges;  // u < v, sorted, unique
  std::vector<int> community;              // 0 or 1 per vertex once partitioned

  void validate() const {
    require(vertex_count >= 1, "SocialGraph: need at least one vertex");
    for (auto [u, v] : edges) {
      require(u >= 0 && v < vertex_count && u < v, "SocialGraph: malformed edge");
    }
    for (size_t i = 1; i < edges.size(); ++i)
      require(edges[i - 1] < edges[i], "SocialGraph: edges must be sorted and unique");
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(vertex_count);
    for (auto [u, v] : edges) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    return adj;
  }

  bool connected() const {
    if (vertex_count == 0) return false;
    auto adj = adjacency();
    std::vector<char> seen(vertex_count, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          ++reached;
          queue.push_back(v);
        }
    }
    return reached == vertex_count;
  }
};

inline SocialGraph graph_from_edge_list(std::istream& in, int vertex_count) {
  require(vertex_count >= 1, "edge list: vertex count must be >= 1");
  std::set<std::pair<int, int>> uniq;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    int u, v;
    if (!(ls >> u)) continue;  // blank line
    require(static_cast<bool>(ls >> v),
            "edge list: line " + std::to_string(lineno) + " needs two vertex ids");
    require(u >= 0 && v >= 0 && u < vertex_count && v < vertex_count,
            "edge list: line " + std::to_string(lineno) + " vertex id out of range");
    require(u != v, "edge list: line " + std::to_string(lineno) + " is a self-loop");
    uniq.insert({std::min(u, v), std::max(u, v)});
  }
  SocialGraph g;
  g.vertex_count = vertex_count;
  g.edges.assign(uniq.begin(), uniq.end());
  g.validate();
  return g;
}

// Small-world ring lattice with random rewiring. Retries until connected so
// the epidemic process cannot strand an unreachable component.
inline SocialGraph watts_strogatz(int n, int mean_degree, double rewire_prob, Rng& rng) {
  require(n >= 3, "watts_strogatz: need at least 3 vertices");
  require(mean_degree >= 2 && mean_degree % 2 == 0 && mean_degree < n,
          "watts_strogatz: mean degree must be even, >= 2, and < n");
  require(rewire_prob >= 0.0 && rewire_prob <= 1.0, "watts_strogatz: rewire prob in [0, 1]");

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::set<std::pair<int, int>> uniq;
    for (int u = 0; u < n; ++u)
      for (int k = 1; k <= mean_degree / 2; ++k) {
        int v = (u + k) % n;
        uniq.insert({std::min(u, v), std::max(u, v)});
      }
    // Rewire each lattice edge's far endpoint with probability rewire_prob.
    std::vector<std::pair<int, int>> lattice(uniq.begin(), uniq.end());
    for (auto [u, v] : lattice) {
      if (coin(rng) >= rewire_prob) continue;
      uniq.erase({u, v});
      int w = pick(rng);
      int guard = 0;
      while ((w == u || uniq.count({std::min(u, w), std::max(u, w)})) && guard++ < 4 * n)
        w = pick(rng);
      if (w == u || uniq.count({std::min(u, w), std::max(u, w)}))
        uniq.insert({u, v});  // no free slot, keep the original edge
      else
        uniq.insert({std::min(u, w), std::max(u, w)});
    }
    SocialGraph g;
    g.vertex_count = n;
    g.edges.assign(uniq.begin(), uniq.end());
    if (g.connected()) {
      g.validate();
      return g;
    }
  }
  throw NumericError("watts_strogatz: failed to draw a connected graph");
}

// Brandes accumulation of shortest-path edge betweenness (unweighted).
// Each unordered pair contributes once, so accumulated values are halved.
inline std::vector<double> edge_betweenness(const SocialGraph& g) {
  g.validate();
  const int n = g.vertex_count;
  auto adj_sets = g.adjacency();
  // Map vertex pair to edge index for O(1) accumulation lookups.
  std::vector<std::vector<int>> edge_id(n);
  for (int u = 0; u < n; ++u) edge_id[u].assign(n, -1);
  for (size_t e = 0; e < g.edges.size(); ++e) {
    edge_id[g.edges[e].first][g.edges[e].second] = static_cast<int>(e);
    edge_id[g.edges[e].second][g.edges[e].first] = static_cast<int>(e);
  }

  std::vector<double> score(g.edges.size(), 0.0);
  for (int s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1), sigma(n, 0), order;
    order.reserve(n);
    std::vector<double> delta(n, 0.0);
    dist[s] = 0;
    sigma[s] = 1;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      order.push_back(u);
      for (int v : adj_sets[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
        if (dist[v] == dist[u] + 1) sigma[v] += sigma[u];
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int v = *it;
      for (int u : adj_sets[v]) {
        if (dist[u] != dist[v] - 1) continue;
        const double c = (static_cast<double>(sigma[u]) / sigma[v]) * (1.0 + delta[v]);
        score[edge_id[u][v]] += c;
        delta[u] += c;
      }
    }
  }
  for (double& v : score) v /= 2.0;
  return score;
}

namespace detail {

inline int count_components(int n, const std::vector<std::pair<int, int>>& edges,
                            std::vector<int>* labels_out) {
  std::vector<std::vector<int>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<int> label(n, -1);
  int components = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    label[s] = components;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[u])
        if (label[v] < 0) {
          label[v] = components;
          queue.push_back(v);
        }
    }
    ++components;
  }
  if (labels_out) *labels_out = label;
  return components;
}

}  // namespace detail

// Remove the highest-betweenness edge (ties: lowest original edge id,
// recomputing scores after each removal) until the graph splits in two.
// Community 0 is the side containing vertex 0.
inline std::vector<int> girvan_newman_bipartition(const SocialGraph& g) {
  g.validate();
  require(g.connected(), "girvan_newman_bipartition: graph must be connected");
  require(g.vertex_count >= 2, "girvan_newman_bipartition: need at least 2 vertices");

  SocialGraph work = g;
  std::vector<int> original_id(work.edges.size());
  for (size_t i = 0; i < original_id.size(); ++i) original_id[i] = static_cast<int>(i);

  while (true) {
    std::vector<int> labels;
    if (detail::count_components(work.vertex_count, work.edges, &labels) >= 2) {
      std::vector<int> community(work.vertex_count);
      const int side_of_zero = labels[0];
      for (int v = 0; v < work.vertex_count; ++v)
        community[v] = labels[v] == side_of_zero ? 0 : 1;
      return community;
    }
    require(!work.edges.empty(), "girvan_newman_bipartition: ran out of edges");
    auto scores = edge_betweenness(work);
    size_t best = 0;
    for (size_t e = 1; e < scores.size(); ++e) {
      if (scores[e] > scores[best] + 1e-12 ||
          (std::abs(scores[e] - scores[best]) <= 1e-12 && original_id[e] < original_id[best]))
        best = e;
    }
    work.edges.erase(work.edges.begin() + static_cast<long>(best));
    original_id.erase(original_id.begin() + static_cast<long>(best));
  }
}

}  // namespace fairlab
