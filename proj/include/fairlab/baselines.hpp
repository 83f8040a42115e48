#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairlab/common.hpp"
#include "fairlab/envs/attention.hpp"
#include "fairlab/envs/epidemic.hpp"
#include "fairlab/envs/lending.hpp"

// Rule-based comparison policies: a profit-threshold lender that nudges
// group cutoffs toward equal opportunity, a greedy incident-chasing
// allocator (a stand-in for a constrained optimizer, and labeled as such in
// all outputs), a most-exposed-first vaccinator, and uniform-random floors.

namespace fairlab {

enum class BaselineKind { kEoThreshold, kGreedyAttention, kMaxVaccinate, kUniformRandom };

// Approves when the applicant's score clears the group's cutoff. Cutoffs
// start at the profit break-even bucket; each step the group with the lower
// windowed will-repay approval rate has its cutoff lowered one bucket while
// the gap exceeds the tolerance, and cutoffs relax back toward break-even
// once the gap closes. The adjustment rule is this implementation's own
// construction.
class EoThresholdAgent {
 public:
  explicit EoThresholdAgent(const LendingConfig& config, double tolerance = 0.02)
      : tolerance_(tolerance) {
    config.validate();
    require(tolerance >= 0.0, "EoThresholdAgent: negative tolerance");
    base_cutoff_ = config.score_buckets;  // fallback: nothing is profitable
    for (int b = 1; b <= config.score_buckets; ++b) {
      const double pd = default_probability(b, config);
      const double expected_profit =
          (1.0 - pd) * config.loan_amount * config.interest - pd * config.loan_amount;
      if (expected_profit >= 0.0) {
        base_cutoff_ = b;
        break;
      }
    }
    cutoff_[0] = cutoff_[1] = base_cutoff_;
  }

  int act(const LendingState& state, const LendingConfig& config) {
    adjust(state.window, config);
    return state.applicant_score >= cutoff_[state.applicant_group] ? 1 : 0;
  }

  int cutoff(int group) const { return cutoff_[group]; }
  int base_cutoff() const { return base_cutoff_; }

 private:
  void adjust(const CohortWindow<LendingRecord>& window, const LendingConfig& config) {
    double repay[2] = {0.0, 0.0};
    double success[2] = {0.0, 0.0};
    for (const auto& r : window) {
      if (!r.will_repay) continue;
      repay[r.group] += 1.0;
      if (r.success) success[r.group] += 1.0;
    }
    if (repay[0] == 0.0 || repay[1] == 0.0) return;
    const double rate0 = success[0] / repay[0];
    const double rate1 = success[1] / repay[1];
    if (std::abs(rate0 - rate1) > tolerance_) {
      const int lagging = rate0 < rate1 ? 0 : 1;
      cutoff_[lagging] = std::max(1, cutoff_[lagging] - 1);
    } else {
      for (int g = 0; g < 2; ++g) {
        if (cutoff_[g] < base_cutoff_) ++cutoff_[g];
        if (cutoff_[g] > base_cutoff_) --cutoff_[g];
      }
    }
    (void)config;
  }

  double tolerance_;
  int base_cutoff_;
  int cutoff_[2] = {1, 1};
};

// Units proportional to windowed incident counts, leftovers by largest
// remainder with lowest-index ties. No incidents observed yet means equal
// shares.
inline std::vector<int> greedy_attention_allocation(const AttentionState& state,
                                                    const AttentionConfig& config) {
  std::vector<double> counts(config.locations, 0.0);
  double total = 0.0;
  for (const auto& y : state.incident_window)
    for (int k = 0; k < config.locations; ++k) {
      counts[k] += y[k];
      total += y[k];
    }
  if (total <= 0.0) {
    counts.assign(config.locations, 1.0);
    total = config.locations;
  }

  std::vector<int> allocation(config.locations, 0);
  std::vector<double> remainder(config.locations, 0.0);
  int assigned = 0;
  for (int k = 0; k < config.locations; ++k) {
    const double quota = config.units * counts[k] / total;
    allocation[k] = static_cast<int>(std::floor(quota));
    remainder[k] = quota - allocation[k];
    assigned += allocation[k];
  }
  while (assigned < config.units) {
    int best = 0;
    for (int k = 1; k < config.locations; ++k)
      if (remainder[k] > remainder[best]) best = k;
    allocation[best] += 1;
    remainder[best] = -1.0;
    ++assigned;
  }
  return allocation;
}

// Vaccinates the susceptible vertex with the most infected neighbors
// (ties: lowest id); no-op only when nobody is susceptible.
inline int max_vaccinate_action(const EpidemicState& state, const EpidemicConfig& config) {
  require(state.graph != nullptr, "max_vaccinate_action: state not initialized");
  const SocialGraph& g = *state.graph;
  const auto adj = g.adjacency();
  int best = -1, best_contacts = -1;
  for (int v = 0; v < g.vertex_count; ++v) {
    if (state.health[v] != Health::kSusceptible) continue;
    int contacts = 0;
    for (int u : adj[v]) contacts += state.health[u] == Health::kInfected ? 1 : 0;
    if (contacts > best_contacts) {
      best = v;
      best_contacts = contacts;
    }
  }
  return best >= 0 ? best : epidemic_noop_action(config);
}

inline int act_baseline(BaselineKind kind, EoThresholdAgent& agent, const LendingState& state,
                        const LendingConfig& config, Rng& rng) {
  switch (kind) {
    case BaselineKind::kEoThreshold:
      return agent.act(state, config);
    case BaselineKind::kUniformRandom:
      return std::uniform_int_distribution<int>(0, 1)(rng);
    default:
      throw ContractError("act_baseline: kind not usable in the lending environment");
  }
}

inline std::vector<int> act_baseline(BaselineKind kind, const AttentionState& state,
                                     const AttentionConfig& config, Rng& rng) {
  switch (kind) {
    case BaselineKind::kGreedyAttention:
      return greedy_attention_allocation(state, config);
    case BaselineKind::kUniformRandom: {
      std::vector<int> allocation(config.locations, 0);
      std::uniform_int_distribution<int> pick(0, config.locations - 1);
      for (int unit = 0; unit < config.units; ++unit) allocation[pick(rng)] += 1;
      return allocation;
    }
    default:
      throw ContractError("act_baseline: kind not usable in the attention environment");
  }
}

inline int act_baseline(BaselineKind kind, const EpidemicState& state,
                        const EpidemicConfig& config, Rng& rng) {
  switch (kind) {
    case BaselineKind::kMaxVaccinate:
      return max_vaccinate_action(state, config);
    case BaselineKind::kUniformRandom:
      return std::uniform_int_distribution<int>(0, config.vertex_count)(rng);
    default:
      throw ContractError("act_baseline: kind not usable in the epidemic environment");
  }
}

}  // namespace fairlab
