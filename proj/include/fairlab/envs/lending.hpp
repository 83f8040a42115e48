#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairlab/common.hpp"
#include "fairlab/fairness.hpp"

// Two-group lending simulator: applicants arrive with a group label and a
// discrete credit score, approval outcomes shift the group's score
// distribution, and fairness is tracked as an equal-opportunity gap (short
// term) plus the transport distance between windowed group score
// distributions (long term).

namespace fairlab {

struct LendingConfig {
  int score_buckets = 7;  // scores run 1..score_buckets
  std::vector<double> initial_mass_plus = {0.05, 0.10, 0.12, 0.18, 0.20, 0.20, 0.15};
  std::vector<double> initial_mass_minus = {0.15, 0.20, 0.20, 0.18, 0.12, 0.10, 0.05};
  double mass_shift = 0.01;
  double loan_amount = 1.0;
  double interest = 0.3;
  // Per-bucket default probability; empty means linear from 0.9 down to 0.1.
  std::vector<double> default_probabilities;
  int window = 300;
  int episode_length = 512;

  void validate() const {
    require(score_buckets >= 2, "LendingConfig: need at least 2 score buckets");
    require(initial_mass_plus.size() == static_cast<size_t>(score_buckets) &&
                initial_mass_minus.size() == static_cast<size_t>(score_buckets),
            "LendingConfig: initial masses must cover every bucket");
    double sp = 0.0, sm = 0.0, ep = 0.0, em = 0.0;
    for (int i = 0; i < score_buckets; ++i) {
      require(initial_mass_plus[i] >= 0.0 && initial_mass_minus[i] >= 0.0,
              "LendingConfig: negative mass");
      sp += initial_mass_plus[i];
      sm += initial_mass_minus[i];
      ep += (i + 1) * initial_mass_plus[i];
      em += (i + 1) * initial_mass_minus[i];
    }
    require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sm - 1.0) <= 1e-9,
            "LendingConfig: initial masses must sum to 1");
    require(em < ep, "LendingConfig: disadvantaged group must have lower mean score");
    require(mass_shift > 0.0 && mass_shift < 1.0, "LendingConfig: mass shift in (0, 1)");
    require(loan_amount > 0.0 && interest > 0.0, "LendingConfig: loan and interest > 0");
    if (!default_probabilities.empty()) {
      require(default_probabilities.size() == static_cast<size_t>(score_buckets),
              "LendingConfig: default table must cover every bucket");
      for (size_t i = 0; i < default_probabilities.size(); ++i) {
        require(default_probabilities[i] >= 0.0 && default_probabilities[i] <= 1.0,
                "LendingConfig: default probability in [0, 1]");
        if (i > 0)
          require(default_probabilities[i] <= default_probabilities[i - 1] + 1e-12,
                  "LendingConfig: default probability must not increase with score");
      }
    }
    require(window >= 1, "LendingConfig: window >= 1");
    require(episode_length >= 1, "LendingConfig: episode length >= 1");
  }
};

inline double default_probability(int score_bucket, const LendingConfig& config) {
  require(score_bucket >= 1 && score_bucket <= config.score_buckets,
          "default_probability: bucket out of range");
  if (!config.default_probabilities.empty())
    return config.default_probabilities[score_bucket - 1];
  const double hi = 0.9, lo = 0.1;
  return hi + (score_bucket - 1) * (lo - hi) / (config.score_buckets - 1);
}

struct LendingRecord {
  int group = 0;  // 0 advantaged, 1 disadvantaged
  int score = 1;
  bool will_repay = false;
  bool approved = false;
  bool success = false;  // approved and repaid
};

struct LendingState {
  std::vector<double> mass_plus;
  std::vector<double> mass_minus;
  double cash = 0.0;
  int applicant_group = 0;
  int applicant_score = 1;
  bool applicant_will_repay = false;
  CohortWindow<LendingRecord> window{1};
  int step_count = 0;
};

namespace detail {

// Fixed three-draw sampling per applicant keeps RNG consumption independent
// of the agent's actions.
inline void sample_applicant(LendingState& state, const LendingConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  state.applicant_group = unit(rng) < 0.5 ? 0 : 1;
  const auto& mass = state.applicant_group == 0 ? state.mass_plus : state.mass_minus;
  const double u = unit(rng);
  double acc = 0.0;
  state.applicant_score = config.score_buckets;
  for (int b = 1; b <= config.score_buckets; ++b) {
    acc += mass[b - 1];
    if (u < acc) {
      state.applicant_score = b;
      break;
    }
  }
  state.applicant_will_repay =
      unit(rng) < 1.0 - default_probability(state.applicant_score, config);
}

}  // namespace detail

inline LendingState lending_reset(const LendingConfig& config, Rng& rng) {
  config.validate();
  LendingState state;
  state.mass_plus = config.initial_mass_plus;
  state.mass_minus = config.initial_mass_minus;
  state.window = CohortWindow<LendingRecord>(static_cast<size_t>(config.window));
  detail::sample_applicant(state, config, rng);
  return state;
}

// Approve = 1, deny = 0. Returns the reward (the cash change).
inline double lending_step(LendingState& state, int action, const LendingConfig& config,
                           Rng& rng) {
  require(action == 0 || action == 1, "lending_step: action must be 0 (deny) or 1 (approve)");
  const bool approved = action == 1;
  double reward = 0.0;
  if (approved) {
    auto& mass = state.applicant_group == 0 ? state.mass_plus : state.mass_minus;
    const int i = state.applicant_score - 1;
    if (state.applicant_will_repay) {
      reward = config.loan_amount * config.interest;
      if (state.applicant_score < config.score_buckets) {
        const double amount = std::min(config.mass_shift, mass[i]);
        mass[i] -= amount;
        mass[i + 1] += amount;
      }
    } else {
      reward = -config.loan_amount;
      if (state.applicant_score > 1) {
        const double amount = std::min(config.mass_shift, mass[i]);
        mass[i] -= amount;
        mass[i - 1] += amount;
      }
    }
  }
  state.cash += reward;
  state.window.push({state.applicant_group, state.applicant_score, state.applicant_will_repay,
                     approved, approved && state.applicant_will_repay});
  ++state.step_count;
  detail::sample_applicant(state, config, rng);
  return reward;
}

// Equal-opportunity gap over the window: |approval rate among will-repay
// applicants of one group minus the other's|. A group with no will-repay
// members contributes no evidence, so the gap is defined as 0.
inline double lending_short_term(const CohortWindow<LendingRecord>& window) {
  double repay[2] = {0.0, 0.0};
  double success[2] = {0.0, 0.0};
  for (const auto& r : window) {
    if (!r.will_repay) continue;
    repay[r.group] += 1.0;
    if (r.success) success[r.group] += 1.0;
  }
  if (repay[0] == 0.0 || repay[1] == 0.0) return 0.0;
  return std::abs(success[0] / repay[0] - success[1] / repay[1]);
}

// The gap the window would show if `action` were executed for the current
// applicant; used as the massaging bias measure.
inline double lending_short_term_if_executed(const LendingState& state, int action) {
  require(action == 0 || action == 1, "lending_short_term_if_executed: bad action");
  CohortWindow<LendingRecord> window = state.window;
  const bool approved = action == 1;
  window.push({state.applicant_group, state.applicant_score, state.applicant_will_repay,
               approved, approved && state.applicant_will_repay});
  return lending_short_term(window);
}

// Transport distance between the groups' windowed empirical score
// distributions; a group absent from the window falls back to its live mass
// function.
inline double lending_long_term(const LendingState& state, const LendingConfig& config) {
  std::vector<double> hist_plus(config.score_buckets, 0.0);
  std::vector<double> hist_minus(config.score_buckets, 0.0);
  double n_plus = 0.0, n_minus = 0.0;
  for (const auto& r : state.window) {
    if (r.group == 0) {
      hist_plus[r.score - 1] += 1.0;
      n_plus += 1.0;
    } else {
      hist_minus[r.score - 1] += 1.0;
      n_minus += 1.0;
    }
  }
  if (n_plus > 0.0)
    for (double& v : hist_plus) v /= n_plus;
  else
    hist_plus = state.mass_plus;
  if (n_minus > 0.0)
    for (double& v : hist_minus) v /= n_minus;
  else
    hist_minus = state.mass_minus;
  return wasserstein_1d(hist_plus, hist_minus);
}

// Group one-hot followed by score-bucket one-hot.
inline std::vector<double> lending_encode(const LendingState& state,
                                          const LendingConfig& config) {
  std::vector<double> enc(2 + config.score_buckets, 0.0);
  enc[state.applicant_group] = 1.0;
  enc[2 + state.applicant_score - 1] = 1.0;
  return enc;
}

}  // namespace fairlab
