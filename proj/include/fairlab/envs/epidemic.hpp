#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "fairlab/common.hpp"
#include "fairlab/fairness.hpp"
#include "fairlab/graph.hpp"

// Vaccination simulator on a contact network: susceptible-infected-recovered
// dynamics, one vaccine per step, and fairness measured across the two
// communities found by the betweenness bipartition.

namespace fairlab {

enum class Health { kSusceptible, kInfected, kRecovered };

struct EpidemicConfig {
  double infection_factor = 0.1;  // per-contact transmission factor
  double recovery_factor = 0.05;  // per-step recovery probability
  int initial_infected = 3;
  int vertex_count = 50;
  int mean_degree = 4;
  double rewire_prob = 0.1;
  std::uint64_t graph_seed = 11;
  std::string graph_file;  // optional edge-list override, "u v" per line
  int window = 100;
  int episode_length = 100;

  void validate() const {
    require(infection_factor >= 0.0 && infection_factor <= 1.0,
            "EpidemicConfig: infection factor in [0, 1]");
    require(recovery_factor >= 0.0 && recovery_factor <= 1.0,
            "EpidemicConfig: recovery factor in [0, 1]");
    require(vertex_count >= 4, "EpidemicConfig: need at least 4 vertices");
    require(initial_infected >= 1 && initial_infected < vertex_count,
            "EpidemicConfig: initial infected count must be in [1, vertices)");
    require(window >= 1, "EpidemicConfig: window >= 1");
    require(episode_length >= 1, "EpidemicConfig: episode length >= 1");
  }
};

// Builds (or loads) the contact network and labels its two communities.
inline SocialGraph epidemic_graph(const EpidemicConfig& config) {
  config.validate();
  SocialGraph g;
  if (!config.graph_file.empty()) {
    std::ifstream in(config.graph_file);
    require(static_cast<bool>(in), "epidemic_graph: cannot open " + config.graph_file);
    g = graph_from_edge_list(in, config.vertex_count);
    require(g.connected(), "epidemic_graph: edge-list graph must be connected");
  } else {
    Rng rng(mix_seed(config.graph_seed));
    g = watts_strogatz(config.vertex_count, config.mean_degree, config.rewire_prob, rng);
  }
  g.community = girvan_newman_bipartition(g);
  return g;
}

struct EpidemicRecord {
  std::array<int, 2> vaccinated{0, 0};
  std::array<int, 2> newly_infected{0, 0};
};

struct EpidemicState {
  const SocialGraph* graph = nullptr;  // shared, owned by the run
  std::vector<Health> health;
  CohortWindow<EpidemicRecord> window{1};
  int step_count = 0;
};

inline EpidemicState epidemic_reset(const EpidemicConfig& config, const SocialGraph& graph,
                                    Rng& rng) {
  config.validate();
  graph.validate();
  require(graph.community.size() == static_cast<size_t>(graph.vertex_count),
          "epidemic_reset: graph must carry community labels");
  EpidemicState state;
  state.graph = &graph;
  state.health.assign(graph.vertex_count, Health::kSusceptible);
  state.window = CohortWindow<EpidemicRecord>(static_cast<size_t>(config.window));
  std::uniform_int_distribution<int> pick(0, graph.vertex_count - 1);
  int seeded = 0;
  while (seeded < config.initial_infected) {
    const int v = pick(rng);
    if (state.health[v] == Health::kInfected) continue;
    state.health[v] = Health::kInfected;
    ++seeded;
  }
  return state;
}

// Action ids 0..V-1 vaccinate that vertex; V is the explicit no-op.
inline int epidemic_noop_action(const EpidemicConfig& config) { return config.vertex_count; }

struct EpidemicStepResult {
  double reward = 0.0;
  bool vaccination_applied = false;  // false also covers non-susceptible targets
  std::array<int, 2> new_infections{0, 0};
};

inline EpidemicStepResult epidemic_step(EpidemicState& state, int action,
                                        const EpidemicConfig& config, Rng& rng) {
  require(state.graph != nullptr, "epidemic_step: state not initialized");
  const SocialGraph& g = *state.graph;
  require(action >= 0 && action <= g.vertex_count,
          "epidemic_step: action must be a vertex id or the no-op");

  EpidemicRecord record;
  EpidemicStepResult result;
  if (action < g.vertex_count && state.health[action] == Health::kSusceptible) {
    state.health[action] = Health::kRecovered;  // vaccination jumps S to R
    record.vaccinated[g.community[action]] += 1;
    result.vaccination_applied = true;
  }

  // Simultaneous update from the pre-step infected set: new infections and
  // recoveries both read the snapshot, not each other's effects.
  std::vector<char> infected_before(g.vertex_count, 0);
  for (int v = 0; v < g.vertex_count; ++v)
    infected_before[v] = state.health[v] == Health::kInfected ? 1 : 0;
  const auto adj = g.adjacency();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> to_infect;
  for (int v = 0; v < g.vertex_count; ++v) {
    if (state.health[v] != Health::kSusceptible) continue;
    int contacts = 0;
    for (int u : adj[v]) contacts += infected_before[u];
    if (contacts == 0) continue;
    const double p = 1.0 - std::pow(1.0 - config.infection_factor, contacts);
    if (unit(rng) < p) to_infect.push_back(v);
  }
  std::vector<int> to_recover;
  for (int v = 0; v < g.vertex_count; ++v) {
    if (!infected_before[v]) continue;
    if (unit(rng) < config.recovery_factor) to_recover.push_back(v);
  }

  for (int v : to_infect) {
    state.health[v] = Health::kInfected;
    record.newly_infected[g.community[v]] += 1;
  }
  for (int v : to_recover) state.health[v] = Health::kRecovered;

  result.new_infections = record.newly_infected;
  state.window.push(record);
  ++state.step_count;

  int infected_after = 0;
  for (Health h : state.health)
    if (h == Health::kInfected) ++infected_after;
  result.reward = 1.0 - static_cast<double>(infected_after) / g.vertex_count;
  return result;
}

// Equal-opportunity-style gap over the window, with +1 smoothing on the
// new-infection denominators.
inline double epidemic_short_term(const CohortWindow<EpidemicRecord>& window) {
  double vacc[2] = {0.0, 0.0};
  double infected[2] = {0.0, 0.0};
  for (const auto& r : window) {
    vacc[0] += r.vaccinated[0];
    vacc[1] += r.vaccinated[1];
    infected[0] += r.newly_infected[0];
    infected[1] += r.newly_infected[1];
  }
  return std::abs(vacc[0] / (infected[0] + 1.0) - vacc[1] / (infected[1] + 1.0));
}

// The gap the window would show if `action` were executed now. This step's
// infections are not yet known, so the hypothetical record carries only the
// vaccination; all candidates are compared on equal footing.
inline double epidemic_short_term_if_executed(const EpidemicState& state, int action,
                                              const EpidemicConfig& config) {
  require(state.graph != nullptr, "epidemic_short_term_if_executed: state not initialized");
  const SocialGraph& g = *state.graph;
  require(action >= 0 && action <= g.vertex_count,
          "epidemic_short_term_if_executed: bad action");
  (void)config;
  CohortWindow<EpidemicRecord> window = state.window;
  EpidemicRecord record;
  if (action < g.vertex_count && state.health[action] == Health::kSusceptible)
    record.vaccinated[g.community[action]] += 1;
  window.push(record);
  return epidemic_short_term(window);
}

// Total variation between the two communities' health-state compositions.
inline double epidemic_long_term(const EpidemicState& state) {
  require(state.graph != nullptr, "epidemic_long_term: state not initialized");
  const SocialGraph& g = *state.graph;
  std::vector<double> comp0(3, 0.0), comp1(3, 0.0);
  double n0 = 0.0, n1 = 0.0;
  for (int v = 0; v < g.vertex_count; ++v) {
    auto& comp = g.community[v] == 0 ? comp0 : comp1;
    comp[static_cast<int>(state.health[v])] += 1.0;
    (g.community[v] == 0 ? n0 : n1) += 1.0;
  }
  require(n0 > 0.0 && n1 > 0.0, "epidemic_long_term: a community is empty");
  for (double& v : comp0) v /= n0;
  for (double& v : comp1) v /= n1;
  return total_variation(comp0, comp1);
}

// When the sampled action vaccinates a susceptible individual, consider the
// opposite community's susceptible with the closest policy probability
// (ties: lowest vertex id); swap if that probability gap is inside the
// threshold and the swap strictly reduces the prospective gap.
struct EpidemicMassageResult {
  int action = 0;
  bool altered = false;
  double probability_gap = 0.0;
};

inline EpidemicMassageResult massage_vaccination(const EpidemicState& state,
                                                 const std::vector<double>& action_probs,
                                                 int sampled, const EpidemicConfig& config,
                                                 double threshold) {
  require(state.graph != nullptr, "massage_vaccination: state not initialized");
  const SocialGraph& g = *state.graph;
  require(action_probs.size() == static_cast<size_t>(g.vertex_count) + 1,
          "massage_vaccination: need one probability per vertex plus the no-op");
  require(sampled >= 0 && sampled <= g.vertex_count, "massage_vaccination: bad action");
  require(threshold >= 0.0, "massage_vaccination: negative threshold");

  EpidemicMassageResult result;
  result.action = sampled;
  if (sampled == g.vertex_count || state.health[sampled] != Health::kSusceptible)
    return result;

  const int other = 1 - g.community[sampled];
  int candidate = -1;
  double candidate_gap = 0.0;
  for (int v = 0; v < g.vertex_count; ++v) {
    if (g.community[v] != other || state.health[v] != Health::kSusceptible) continue;
    const double gap = std::abs(action_probs[sampled] - action_probs[v]);
    if (candidate < 0 || gap < candidate_gap) {
      candidate = v;
      candidate_gap = gap;
    }
  }
  if (candidate < 0 || candidate_gap >= threshold) return result;

  const double bias_sampled = epidemic_short_term_if_executed(state, sampled, config);
  const double bias_candidate = epidemic_short_term_if_executed(state, candidate, config);
  if (bias_candidate < bias_sampled) {
    result.action = candidate;
    result.altered = true;
    result.probability_gap = candidate_gap;
  }
  return result;
}

// One-hot health per vertex, flattened.
inline std::vector<double> epidemic_encode(const EpidemicState& state) {
  require(state.graph != nullptr, "epidemic_encode: state not initialized");
  std::vector<double> enc(static_cast<size_t>(state.graph->vertex_count) * 3, 0.0);
  for (int v = 0; v < state.graph->vertex_count; ++v)
    enc[static_cast<size_t>(v) * 3 + static_cast<int>(state.health[v])] = 1.0;
  return enc;
}

}  // namespace fairlab
