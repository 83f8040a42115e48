#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fairlab/common.hpp"
#include "fairlab/nn.hpp"

// Clipped-surrogate policy optimization over trajectories whose executed
// actions may have been overridden at decision time. Ratios always use the
// executed action's log-probability, stored when the batch was collected,
// so no importance-sampling correction is needed.

namespace fairlab {

struct Transition {
  std::vector<double> state_encoding;
  int sampled_action = 0;
  int executed_action = 0;
  // Per-action weights of the executed decision. Empty means a plain
  // discrete action (one-hot on executed_action); the allocation
  // environment stores its unit counts here.
  std::vector<double> action_weights;
  double action_confidence = 0.0;  // pi(sampled_action | s) at collection time
  double executed_log_prob = 0.0;  // behavior log-likelihood of the executed decision
  double reward = 0.0;
  double regularizer_value = 0.0;
  bool done = false;

  void validate() const {
    require(action_confidence >= 0.0 && action_confidence <= 1.0,
            "Transition: action confidence must be in [0, 1]");
    require(executed_log_prob <= 1e-12, "Transition: executed log-prob must be <= 0");
    require_finite(reward, "Transition reward");
    require_finite(regularizer_value, "Transition regularizer value");
  }
};

struct TrajectoryBatch {
  std::vector<Transition> transitions;
  std::vector<size_t> episode_starts;    // first transition index per episode
  std::vector<double> bootstrap_values;  // per episode: V beyond the last step, 0 if terminal
  std::vector<double> values;            // V(s_t) per step
  std::vector<double> advantages;
  std::vector<double> returns;

  void validate_layout() const {
    require(!transitions.empty(), "TrajectoryBatch: empty batch");
    require(!episode_starts.empty() && episode_starts.front() == 0,
            "TrajectoryBatch: episode starts must begin at 0");
    for (size_t i = 1; i < episode_starts.size(); ++i)
      require(episode_starts[i] > episode_starts[i - 1] &&
                  episode_starts[i] < transitions.size(),
              "TrajectoryBatch: episode starts must be increasing and in range");
    require(bootstrap_values.size() == episode_starts.size(),
            "TrajectoryBatch: one bootstrap value per episode");
    require(values.size() == transitions.size(),
            "TrajectoryBatch: one value estimate per step");
  }
};

struct PpoConfig {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch_size = 64;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  int steps_per_iteration = 512;
  double reg_weight = 0.0;   // lambda on the advantage regularizer
  double reg_delta = 0.05;   // short-term tolerance inside the regularizer
  double entropy_coef = 0.01;
  bool normalize_advantages = true;

  void validate() const {
    require(discount >= 0.0 && discount <= 1.0, "PpoConfig: discount in [0, 1]");
    require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "PpoConfig: gae_lambda in [0, 1]");
    require(clip > 0.0 && clip < 1.0, "PpoConfig: clip in (0, 1)");
    require(epochs >= 1, "PpoConfig: epochs >= 1");
    require(minibatch_size >= 1, "PpoConfig: minibatch size >= 1");
    require(policy_lr > 0.0 && value_lr > 0.0, "PpoConfig: step sizes must be positive");
    require(steps_per_iteration >= 1, "PpoConfig: steps per iteration >= 1");
    require(reg_weight >= 0.0, "PpoConfig: regularizer weight >= 0");
    require(reg_delta >= 0.0, "PpoConfig: regularizer tolerance >= 0");
    require(entropy_coef >= 0.0, "PpoConfig: entropy coefficient >= 0");
  }
};

struct ActorCritic {
  nn::NetworkSpec policy_spec;
  nn::ParameterVector policy_params;
  nn::AdamState policy_opt;
  nn::NetworkSpec value_spec;
  nn::ParameterVector value_params;
  nn::AdamState value_opt;
};

inline ActorCritic make_actor_critic(int state_dim, int action_dim, int hidden, Rng& rng) {
  require(state_dim >= 1 && action_dim >= 2 && hidden >= 1, "make_actor_critic: bad shape");
  ActorCritic ac;
  ac.policy_spec = {{state_dim, hidden, action_dim}, nn::Activation::kTanh,
                    nn::OutputHead::kSoftmax};
  ac.value_spec = {{state_dim, hidden, 1}, nn::Activation::kTanh, nn::OutputHead::kScalar};
  ac.policy_params = nn::init_parameters(ac.policy_spec, rng);
  ac.value_params = nn::init_parameters(ac.value_spec, rng);
  return ac;
}

inline std::vector<double> policy_probs(const ActorCritic& ac, const std::vector<double>& state) {
  auto [out, tape] = nn::forward(ac.policy_spec, ac.policy_params, nn::Matrix::from_row(state));
  return out.data;
}

inline double value_estimate(const ActorCritic& ac, const std::vector<double>& state) {
  auto [out, tape] = nn::forward(ac.value_spec, ac.value_params, nn::Matrix::from_row(state));
  return out.data[0];
}

// Inverse-CDF draw with a single uniform variate, so RNG consumption per
// decision is fixed.
inline int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  require(!probs.empty(), "sample_categorical: empty distribution");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (size_t a = 0; a < probs.size(); ++a) {
    acc += probs[a];
    if (u < acc) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Log-likelihood of the executed decision: log p[a] for plain actions, and
// the multinomial sum_k w_k log p_k (constant coefficient dropped, it
// cancels in every ratio) when weights are present.
inline double executed_log_likelihood(const std::vector<double>& log_probs,
                                      const Transition& t) {
  if (t.action_weights.empty()) {
    require(t.executed_action >= 0 &&
                t.executed_action < static_cast<int>(log_probs.size()),
            "executed_log_likelihood: action id out of range");
    return log_probs[t.executed_action];
  }
  require(t.action_weights.size() == log_probs.size(),
          "executed_log_likelihood: weight vector width mismatch");
  double acc = 0.0;
  for (size_t k = 0; k < log_probs.size(); ++k)
    if (t.action_weights[k] != 0.0) acc += t.action_weights[k] * log_probs[k];
  return acc;
}

// Generalized advantage estimation per episode, bootstrapping past the last
// step with the supplied value (0 when the episode truly terminated).
inline void compute_gae(TrajectoryBatch& batch, const PpoConfig& config) {
  config.validate();
  batch.validate_layout();
  const size_t n = batch.transitions.size();
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);

  for (size_t ep = 0; ep < batch.episode_starts.size(); ++ep) {
    const size_t start = batch.episode_starts[ep];
    const size_t end =
        ep + 1 < batch.episode_starts.size() ? batch.episode_starts[ep + 1] : n;
    double carry = 0.0;
    for (size_t t = end; t-- > start;) {
      const double next_value = t + 1 < end ? batch.values[t + 1] : batch.bootstrap_values[ep];
      const double delta = batch.transitions[t].reward +
                           config.discount * next_value - batch.values[t];
      carry = delta + config.discount * config.gae_lambda * carry;
      batch.advantages[t] = carry;
      batch.returns[t] = carry + batch.values[t];
      require_finite(batch.advantages[t], "compute_gae advantage");
    }
  }
}

inline double regularized_advantage(double advantage, double regularizer_value, double lambda) {
  require_finite(advantage, "regularized_advantage advantage");
  require_finite(regularizer_value, "regularized_advantage regularizer");
  require_finite(lambda, "regularized_advantage lambda");
  return advantage + lambda * regularizer_value;
}

// Adds lambda * R(s_t) to every advantage. A zero weight leaves the array
// bit-identical, which the reduction-to-plain-PPO check relies on.
inline void apply_regularizer(TrajectoryBatch& batch, double lambda) {
  if (lambda == 0.0) return;
  require(batch.advantages.size() == batch.transitions.size(),
          "apply_regularizer: run compute_gae first");
  for (size_t t = 0; t < batch.advantages.size(); ++t)
    batch.advantages[t] = regularized_advantage(
        batch.advantages[t], batch.transitions[t].regularizer_value, lambda);
}

inline double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  require(ratio > 0.0, "clipped_surrogate: ratio must be positive");
  require(clip_eps > 0.0 && clip_eps < 1.0, "clipped_surrogate: clip in (0, 1)");
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

inline double value_loss(const std::vector<double>& predictions,
                         const std::vector<double>& target_returns) {
  require(!predictions.empty() && predictions.size() == target_returns.size(),
          "value_loss: prediction and return lengths must match and be non-empty");
  double acc = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - target_returns[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predictions.size());
}

struct UpdateDiagnostics {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double policy_loss = 0.0;  // negative mean surrogate
  double value_loss = 0.0;
  double entropy = 0.0;
};

// Several epochs of shuffled-minibatch ascent on the clipped surrogate and
// descent on the value MSE. `iteration` only labels error messages.
inline UpdateDiagnostics ppo_update(ActorCritic& ac, TrajectoryBatch& batch,
                                    const PpoConfig& config, Rng& rng, int iteration = -1) {
  config.validate();
  batch.validate_layout();
  require(batch.advantages.size() == batch.transitions.size() &&
              batch.returns.size() == batch.transitions.size(),
          "ppo_update: advantages and returns must be computed first");
  const size_t n = batch.transitions.size();
  const std::string where = " (iteration " + std::to_string(iteration) + ")";

  std::vector<double> advantages = batch.advantages;
  if (config.normalize_advantages) {
    double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) /
                  static_cast<double>(n);
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    const double stddev = std::sqrt(var / static_cast<double>(n));
    for (double& a : advantages) a = (a - mean) / (stddev + 1e-8);
  }

  const int action_dim = ac.policy_spec.output_size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateDiagnostics diag;
  double diag_weight = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t mb_start = 0; mb_start < n; mb_start += config.minibatch_size) {
      const size_t mb_end = std::min(n, mb_start + config.minibatch_size);
      const size_t b = mb_end - mb_start;

      nn::Matrix states(static_cast<int>(b), ac.policy_spec.input_size());
      for (size_t r = 0; r < b; ++r) {
        const auto& s = batch.transitions[order[mb_start + r]].state_encoding;
        require(s.size() == static_cast<size_t>(states.cols),
                "ppo_update: state width mismatch" + where);
        std::copy(s.begin(), s.end(), states.data.begin() + r * states.cols);
      }

      auto [probs, ptape] = nn::forward(ac.policy_spec, ac.policy_params, states);
      nn::Matrix log_probs = nn::log_softmax_rows(ptape.pre.back());

      nn::Matrix logit_grad(static_cast<int>(b), action_dim);
      double mb_surrogate = 0.0, mb_entropy = 0.0;
      for (size_t r = 0; r < b; ++r) {
        const Transition& t = batch.transitions[order[mb_start + r]];
        const double adv = advantages[order[mb_start + r]];
        std::vector<double> row_lp(log_probs.data.begin() + r * action_dim,
                                   log_probs.data.begin() + (r + 1) * action_dim);
        const double new_lp = executed_log_likelihood(row_lp, t);
        const double ratio = std::exp(new_lp - t.executed_log_prob);
        if (!std::isfinite(ratio) || ratio <= 0.0)
          throw NumericError("ppo_update: degenerate probability ratio" + where);

        const double unclipped = ratio * adv;
        const double clipped =
            std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv;
        mb_surrogate += std::min(unclipped, clipped);
        diag.mean_ratio += ratio;
        if (std::abs(ratio - 1.0) > config.clip) diag.clip_fraction += 1.0;

        // d surrogate / d new_lp: active only while the unclipped branch
        // attains the min; the clipped branch is locally constant there.
        const double dsur_dlp = unclipped <= clipped ? unclipped : 0.0;

        double entropy = 0.0;
        for (int k = 0; k < action_dim; ++k) {
          const double p = probs(static_cast<int>(r), k);
          if (p > 0.0) entropy -= p * row_lp[k];
        }
        mb_entropy += entropy;

        // Loss gradient at the logits. Log-likelihood term:
        // d lp / d z_k = w_k - (sum of weights) * p_k. Entropy term:
        // d H / d z_k = -p_k (log p_k + H).
        double weight_sum = 0.0;
        if (t.action_weights.empty())
          weight_sum = 1.0;
        else
          weight_sum = std::accumulate(t.action_weights.begin(), t.action_weights.end(), 0.0);
        for (int k = 0; k < action_dim; ++k) {
          const double w = t.action_weights.empty()
                               ? (k == t.executed_action ? 1.0 : 0.0)
                               : t.action_weights[k];
          const double p = probs(static_cast<int>(r), k);
          const double dlp_dz = w - weight_sum * p;
          const double dh_dz = -p * (row_lp[k] + entropy);
          logit_grad(static_cast<int>(r), k) =
              (-dsur_dlp * dlp_dz - config.entropy_coef * dh_dz) / static_cast<double>(b);
        }
      }

      const double mb_policy_loss =
          -(mb_surrogate + config.entropy_coef * mb_entropy) / static_cast<double>(b);
      if (!std::isfinite(mb_policy_loss))
        throw NumericError("ppo_update: non-finite policy loss" + where);

      auto policy_grad = nn::backward_logits(ptape, logit_grad);
      nn::adam_step(ac.policy_params, policy_grad, ac.policy_opt, config.policy_lr);

      auto [vpred, vtape] = nn::forward(ac.value_spec, ac.value_params, states);
      nn::Matrix value_grad(static_cast<int>(b), 1);
      double mb_value_loss = 0.0;
      for (size_t r = 0; r < b; ++r) {
        const double diff = vpred(static_cast<int>(r), 0) - batch.returns[order[mb_start + r]];
        mb_value_loss += diff * diff;
        value_grad(static_cast<int>(r), 0) = 2.0 * diff / static_cast<double>(b);
      }
      mb_value_loss /= static_cast<double>(b);
      if (!std::isfinite(mb_value_loss))
        throw NumericError("ppo_update: non-finite value loss" + where);

      auto vgrad = nn::backward(vtape, value_grad);
      nn::adam_step(ac.value_params, vgrad, ac.value_opt, config.value_lr);

      diag.policy_loss += mb_policy_loss * static_cast<double>(b);
      diag.value_loss += mb_value_loss * static_cast<double>(b);
      diag.entropy += mb_entropy;
      diag_weight += static_cast<double>(b);
    }
  }

  diag.mean_ratio /= diag_weight;
  diag.clip_fraction /= diag_weight;
  diag.policy_loss /= diag_weight;
  diag.value_loss /= diag_weight;
  diag.entropy /= diag_weight;
  return diag;
}

}  // namespace fairlab
