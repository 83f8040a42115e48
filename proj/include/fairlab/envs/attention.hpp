#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <vector>

#include "fairlab/common.hpp"
#include "fairlab/fairness.hpp"

// Incident-attention simulator: K locations generate Poisson incidents whose
// rates rise when ignored and fall with attention, N indivisible units are
// assigned per step by iteratively picking the policy's highest-probability
// location, and fairness tracks allocation shares (short term) against the
// incident distribution (long term).

namespace fairlab {

struct AttentionConfig {
  int locations = 5;   // K
  int units = 6;       // N
  std::vector<double> increase_rates;  // per location; empty -> seeded distinct draws
  std::uint64_t rates_seed = 7;        // stream for the default increase-rate draw
  double decrease_rate = 0.05;
  std::vector<double> initial_rates;   // empty -> same as increase rates
  double discover_weight = 1.0;    // zeta0
  double miss_weight = 0.25;       // zeta1
  int history = 8;                 // H
  int window = 100;                // w
  int episode_length = 100;

  void validate() const {
    require(locations >= 2, "AttentionConfig: need at least 2 locations");
    require(units >= 1, "AttentionConfig: need at least 1 unit");
    if (!increase_rates.empty()) {
      require(increase_rates.size() == static_cast<size_t>(locations),
              "AttentionConfig: one increase rate per location");
      for (double r : increase_rates) require(r > 0.0, "AttentionConfig: rates must be > 0");
    }
    if (!initial_rates.empty()) {
      require(initial_rates.size() == static_cast<size_t>(locations),
              "AttentionConfig: one initial rate per location");
      for (double r : initial_rates) require(r >= 0.0, "AttentionConfig: initial rates >= 0");
    }
    require(decrease_rate > 0.0, "AttentionConfig: decrease rate must be > 0");
    require(discover_weight >= 0.0 && miss_weight >= 0.0,
            "AttentionConfig: reward weights must be >= 0");
    require(history >= 1, "AttentionConfig: history length >= 1");
    require(window >= 1, "AttentionConfig: window >= 1");
    require(episode_length >= 1, "AttentionConfig: episode length >= 1");
  }

  // Distinct per-location rates in [0.02, 0.1], fixed by rates_seed so every
  // run of a config sees the same environment.
  std::vector<double> resolved_increase_rates() const {
    if (!increase_rates.empty()) return increase_rates;
    Rng rng(mix_seed(rates_seed));
    std::uniform_real_distribution<double> dist(0.02, 0.1);
    std::vector<double> rates;
    while (static_cast<int>(rates.size()) < locations) {
      const double r = dist(rng);
      bool clashes = false;
      for (double prev : rates)
        if (std::abs(prev - r) < 1e-4) clashes = true;
      if (!clashes) rates.push_back(r);
    }
    return rates;
  }
};

struct AttentionObservation {
  std::vector<double> discovered;  // y-hat per location
  std::vector<double> incidents;   // y per location
  std::vector<double> allocation;  // a per location
  std::vector<double> ratio;       // y-hat over y, 0/0 = 1
};

struct AttentionState {
  std::vector<double> rates;  // current Poisson rate per location
  std::deque<AttentionObservation> history;  // exactly H entries, zero-padded at start
  CohortWindow<std::vector<int>> allocation_window{1};
  CohortWindow<std::vector<int>> incident_window{1};
  double incident_scale = 1.0;  // running max incident count, for encoding
  int step_count = 0;
};

inline AttentionState attention_reset(const AttentionConfig& config) {
  config.validate();
  AttentionState state;
  state.rates =
      config.initial_rates.empty() ? config.resolved_increase_rates() : config.initial_rates;
  const std::vector<double> zeros(config.locations, 0.0);
  std::vector<double> ones(config.locations, 1.0);
  for (int h = 0; h < config.history; ++h)
    state.history.push_back({zeros, zeros, zeros, ones});
  state.allocation_window = CohortWindow<std::vector<int>>(static_cast<size_t>(config.window));
  state.incident_window = CohortWindow<std::vector<int>>(static_cast<size_t>(config.window));
  return state;
}

// Assign N units one at a time to the current argmax location, removing 1/N
// of probability mass each time (which may push an entry negative). Ties go
// to the lowest index.
inline std::vector<int> build_allocation(const std::vector<double>& location_probs, int n) {
  require(!location_probs.empty(), "build_allocation: empty probability vector");
  require(n >= 1, "build_allocation: need at least one unit");
  double sum = 0.0;
  for (double p : location_probs) {
    require(p >= 0.0, "build_allocation: negative probability");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "build_allocation: probabilities must sum to 1");

  std::vector<double> working = location_probs;
  std::vector<int> allocation(location_probs.size(), 0);
  for (int unit = 0; unit < n; ++unit) {
    size_t best = 0;
    for (size_t k = 1; k < working.size(); ++k)
      if (working[k] > working[best]) best = k;
    allocation[best] += 1;
    working[best] -= 1.0 / n;
  }
  return allocation;
}

inline double attention_step(AttentionState& state, const std::vector<int>& allocation,
                             const AttentionConfig& config, Rng& rng) {
  require(allocation.size() == static_cast<size_t>(config.locations),
          "attention_step: allocation must cover every location");
  int total = 0;
  for (int a : allocation) {
    require(a >= 0, "attention_step: negative allocation entry");
    total += a;
  }
  require(total == config.units, "attention_step: allocation must sum to the unit count");

  const auto increase = config.resolved_increase_rates();
  AttentionObservation obs;
  obs.discovered.resize(config.locations);
  obs.incidents.resize(config.locations);
  obs.allocation.resize(config.locations);
  obs.ratio.resize(config.locations);

  std::vector<int> incidents(config.locations, 0);
  double sum_discovered = 0.0, sum_incidents = 0.0;
  for (int k = 0; k < config.locations; ++k) {
    const int y = state.rates[k] > 0.0
                      ? std::poisson_distribution<int>(state.rates[k])(rng)
                      : 0;
    incidents[k] = y;
    const int discovered = std::min(allocation[k], y);
    sum_discovered += discovered;
    sum_incidents += y;
    obs.incidents[k] = y;
    obs.discovered[k] = discovered;
    obs.allocation[k] = allocation[k];
    obs.ratio[k] = y > 0 ? static_cast<double>(discovered) / y : 1.0;
    state.incident_scale = std::max(state.incident_scale, static_cast<double>(y));

    if (allocation[k] == 0)
      state.rates[k] += increase[k];
    else
      state.rates[k] = std::max(0.0, state.rates[k] - config.decrease_rate * allocation[k]);
  }

  const double reward = config.discover_weight * sum_discovered -
                        config.miss_weight * (sum_incidents - sum_discovered);

  state.history.push_back(std::move(obs));
  state.history.pop_front();
  state.allocation_window.push(allocation);
  state.incident_window.push(incidents);
  ++state.step_count;
  return reward;
}

// Demographic-parity gap over the window: worst location's deviation of its
// attention share from the uniform share 1/K.
inline double attention_short_term(const CohortWindow<std::vector<int>>& allocation_window,
                                   int n, int k) {
  require(allocation_window.size() > 0, "attention_short_term: empty window");
  require(n >= 1 && k >= 2, "attention_short_term: bad unit or location count");
  std::vector<double> totals(k, 0.0);
  for (const auto& alloc : allocation_window)
    for (int j = 0; j < k; ++j) totals[j] += alloc[j];
  const double denom = static_cast<double>(n) * static_cast<double>(allocation_window.size());
  double worst = 0.0;
  for (int j = 0; j < k; ++j)
    worst = std::max(worst, std::abs(totals[j] / denom - 1.0 / k));
  return worst;
}

// The gap the window would show if `allocation` were executed now.
inline double attention_short_term_if_executed(const AttentionState& state,
                                               const std::vector<int>& allocation,
                                               const AttentionConfig& config) {
  CohortWindow<std::vector<int>> window = state.allocation_window;
  window.push(allocation);
  return attention_short_term(window, config.units, config.locations);
}

enum class AttentionMode { kTrain, kEval };

// Transport distance between the incident distribution over locations and
// the uniform distribution. Training estimates the distribution from
// windowed incident counts; evaluation reads the true rates.
inline double attention_long_term(const AttentionState& state, const AttentionConfig& config,
                                  AttentionMode mode) {
  std::vector<double> weights(config.locations, 0.0);
  if (mode == AttentionMode::kTrain) {
    require(state.incident_window.size() > 0,
            "attention_long_term: training mode needs a non-empty incident window");
    for (const auto& y : state.incident_window)
      for (int k = 0; k < config.locations; ++k) weights[k] += y[k];
  } else {
    weights = state.rates;
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 0.0) return 0.0;
  for (double& v : weights) v /= total;
  const std::vector<double> uniform(config.locations, 1.0 / config.locations);
  return wasserstein_1d(weights, uniform);
}

// Single-unit reallocation between a location pair whose policy
// probabilities are within the threshold, keeping the candidate that most
// reduces the windowed gap; the sampled allocation wins ties.
struct AttentionMassageResult {
  std::vector<int> allocation;
  bool altered = false;
  double probability_gap = 0.0;
};

inline AttentionMassageResult massage_allocation(const AttentionState& state,
                                                 const std::vector<double>& location_probs,
                                                 const std::vector<int>& sampled_allocation,
                                                 const AttentionConfig& config,
                                                 double threshold) {
  require(location_probs.size() == static_cast<size_t>(config.locations),
          "massage_allocation: probability vector width mismatch");
  require(threshold >= 0.0, "massage_allocation: negative threshold");
  AttentionMassageResult result;
  result.allocation = sampled_allocation;
  double best_bias = attention_short_term_if_executed(state, sampled_allocation, config);
  for (int from = 0; from < config.locations; ++from) {
    if (sampled_allocation[from] == 0) continue;
    for (int to = 0; to < config.locations; ++to) {
      if (to == from) continue;
      const double gap = std::abs(location_probs[from] - location_probs[to]);
      if (gap >= threshold) continue;
      std::vector<int> candidate = sampled_allocation;
      candidate[from] -= 1;
      candidate[to] += 1;
      const double bias = attention_short_term_if_executed(state, candidate, config);
      if (bias < best_bias) {
        best_bias = bias;
        result.allocation = std::move(candidate);
        result.probability_gap = gap;
      }
    }
  }
  result.altered = result.allocation != sampled_allocation;
  if (!result.altered) result.probability_gap = 0.0;
  return result;
}

// Flattened observation history; allocations scaled by the unit count,
// counts by the running incident maximum, discovery ratios kept as-is.
inline std::vector<double> attention_encode(const AttentionState& state,
                                            const AttentionConfig& config) {
  std::vector<double> enc;
  enc.reserve(static_cast<size_t>(config.history) * config.locations * 4);
  for (const auto& obs : state.history) {
    for (int k = 0; k < config.locations; ++k) {
      enc.push_back(obs.discovered[k] / state.incident_scale);
      enc.push_back(obs.incidents[k] / state.incident_scale);
      enc.push_back(obs.allocation[k] / static_cast<double>(config.units));
      enc.push_back(obs.ratio[k]);
    }
  }
  return enc;
}

}  // namespace fairlab
