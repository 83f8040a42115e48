#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairlab/baselines.hpp"
#include "fairlab/common.hpp"
#include "fairlab/config.hpp"
#include "fairlab/envs/attention.hpp"
#include "fairlab/envs/epidemic.hpp"
#include "fairlab/envs/lending.hpp"
#include "fairlab/fairness.hpp"
#include "fairlab/graph.hpp"
#include "fairlab/nn.hpp"
#include "fairlab/ppo.hpp"

// Experiment runner: seeded training with decision-time massaging and the
// long-term advantage regularizer, separate seeded evaluation, and
// deterministic CSV/plot-data emission. Given one config and one seed,
// every output byte except the manifest timestamp is reproducible.

namespace fairlab {

inline constexpr const char* kFairlabVersion = "0.1.0";

enum SeedStream : std::uint64_t {
  kStreamPolicyInit = 1,
  kStreamEnv = 2,
  kStreamCollect = 3,
  kStreamUpdate = 4,
  kStreamEvalEpisode = 5,
  kStreamEvalEnv = 6,
  kStreamEvalPolicy = 7,
};

struct Decision {
  int sampled_action = 0;
  int executed_action = 0;
  std::vector<double> action_weights;  // allocation environments only
  std::vector<int> allocation;         // attention executes this vector
  double action_confidence = 0.0;
  double executed_log_prob = 0.0;
  bool altered = false;
  double probability_gap = 0.0;
};

struct StepRecord {
  double reward = 0.0;
  double short_term = 0.0;
  double long_term = 0.0;
  double utility = 0.0;
};

struct EvalEpisode {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<StepRecord> steps;
};

struct TrainingIterationRecord {
  int iteration = 0;
  double mean_reward = 0.0;
  double short_term_mean = 0.0;
  double short_term_std = 0.0;
  double long_term_mean = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double threshold = 0.0;
};

struct AuditEntry {
  int iteration = -1;  // -1 marks evaluation-time alterations
  double probability_gap = 0.0;
  double threshold = 0.0;
  bool eval = false;
};

struct TrainingResult {
  std::uint64_t seed = 0;
  std::string config_hash;
  ActorCritic actor_critic;
  std::vector<TrainingIterationRecord> iterations;
  std::vector<AuditEntry> audit;
};

struct EvalResult {
  std::vector<EvalEpisode> episodes;
  std::vector<AuditEntry> audit;
};

// ---------------------------------------------------------------------------
// Environment adapters: one uniform surface over the three simulators so the
// training and evaluation loops are written once.

class LendingAdapter {
 public:
  explicit LendingAdapter(const ExperimentConfig& cfg) : cfg_(cfg) {}

  int state_dim() const { return 2 + cfg_.lending.score_buckets; }
  int action_dim() const { return 2; }
  int episode_length() const { return cfg_.lending.episode_length; }

  void reset(Rng& env_rng) {
    state_ = lending_reset(cfg_.lending, env_rng);
    eo_agent_.emplace(cfg_.lending);
  }

  std::vector<double> encode() const { return lending_encode(state_, cfg_.lending); }

  Decision decide(const std::vector<double>& probs, Rng& policy_rng, bool massaging,
                  double threshold) const {
    Decision d;
    d.sampled_action = sample_categorical(probs, policy_rng);
    d.executed_action = d.sampled_action;
    if (massaging) {
      auto result = massage_action(
          probs, d.sampled_action,
          [this](int a) { return lending_short_term_if_executed(state_, a); }, threshold);
      d.executed_action = result.action;
      d.altered = result.altered;
      d.probability_gap = result.probability_gap;
    }
    d.action_confidence = probs[d.sampled_action];
    d.executed_log_prob = std::log(probs[d.executed_action]);
    return d;
  }

  Decision decide_baseline(BaselineKind kind, Rng& rng) {
    require(eo_agent_.has_value(), "LendingAdapter: reset before acting");
    Decision d;
    d.executed_action = act_baseline(kind, *eo_agent_, state_, cfg_.lending, rng);
    d.sampled_action = d.executed_action;
    d.action_confidence = 1.0;
    return d;
  }

  double step(const Decision& d, Rng& env_rng) {
    return lending_step(state_, d.executed_action, cfg_.lending, env_rng);
  }

  double short_term() const { return lending_short_term(state_.window); }
  double long_term(bool) const { return lending_long_term(state_, cfg_.lending); }

 private:
  const ExperimentConfig& cfg_;
  LendingState state_;
  std::optional<EoThresholdAgent> eo_agent_;
};

class AttentionAdapter {
 public:
  explicit AttentionAdapter(const ExperimentConfig& cfg) : cfg_(cfg) {}

  int state_dim() const {
    return cfg_.attention.history * cfg_.attention.locations * 4;
  }
  int action_dim() const { return cfg_.attention.locations; }
  int episode_length() const { return cfg_.attention.episode_length; }

  void reset(Rng&) { state_ = attention_reset(cfg_.attention); }

  std::vector<double> encode() const { return attention_encode(state_, cfg_.attention); }

  Decision decide(const std::vector<double>& probs, Rng&, bool massaging,
                  double threshold) const {
    Decision d;
    std::vector<int> sampled = build_allocation(probs, cfg_.attention.units);
    d.allocation = sampled;
    if (massaging) {
      auto result = massage_allocation(state_, probs, sampled, cfg_.attention, threshold);
      d.allocation = result.allocation;
      d.altered = result.altered;
      d.probability_gap = result.probability_gap;
    }
    d.sampled_action = argmax_lowest(sampled);
    d.executed_action = argmax_lowest(d.allocation);
    d.action_confidence = probs[d.sampled_action];
    d.action_weights.assign(d.allocation.begin(), d.allocation.end());
    d.executed_log_prob = 0.0;
    for (int k = 0; k < cfg_.attention.locations; ++k) {
      if (d.allocation[k] == 0) continue;
      if (probs[k] <= 0.0)
        throw NumericError("attention policy assigned units to a zero-probability location");
      d.executed_log_prob += d.allocation[k] * std::log(probs[k]);
    }
    return d;
  }

  Decision decide_baseline(BaselineKind kind, Rng& rng) {
    Decision d;
    d.allocation = act_baseline(kind, state_, cfg_.attention, rng);
    d.sampled_action = argmax_lowest(d.allocation);
    d.executed_action = d.sampled_action;
    d.action_confidence = 1.0;
    return d;
  }

  double step(const Decision& d, Rng& env_rng) {
    return attention_step(state_, d.allocation, cfg_.attention, env_rng);
  }

  double short_term() const {
    return attention_short_term(state_.allocation_window, cfg_.attention.units,
                                cfg_.attention.locations);
  }
  double long_term(bool eval) const {
    return attention_long_term(state_, cfg_.attention,
                               eval ? AttentionMode::kEval : AttentionMode::kTrain);
  }

 private:
  static int argmax_lowest(const std::vector<int>& v) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(v.size()); ++k)
      if (v[k] > v[best]) best = k;
    return best;
  }

  const ExperimentConfig& cfg_;
  AttentionState state_;
};

class EpidemicAdapter {
 public:
  explicit EpidemicAdapter(const ExperimentConfig& cfg)
      : cfg_(cfg), graph_(epidemic_graph(cfg.epidemic)) {}

  int state_dim() const { return cfg_.epidemic.vertex_count * 3; }
  int action_dim() const { return cfg_.epidemic.vertex_count + 1; }
  int episode_length() const { return cfg_.epidemic.episode_length; }

  void reset(Rng& env_rng) { state_ = epidemic_reset(cfg_.epidemic, graph_, env_rng); }

  std::vector<double> encode() const { return epidemic_encode(state_); }

  Decision decide(const std::vector<double>& probs, Rng& policy_rng, bool massaging,
                  double threshold) const {
    Decision d;
    d.sampled_action = sample_categorical(probs, policy_rng);
    d.executed_action = d.sampled_action;
    if (massaging) {
      auto result = massage_vaccination(state_, probs, d.sampled_action, cfg_.epidemic,
                                        threshold);
      d.executed_action = result.action;
      d.altered = result.altered;
      d.probability_gap = result.probability_gap;
    }
    d.action_confidence = probs[d.sampled_action];
    d.executed_log_prob = std::log(probs[d.executed_action]);
    return d;
  }

  Decision decide_baseline(BaselineKind kind, Rng& rng) {
    Decision d;
    d.executed_action = act_baseline(kind, state_, cfg_.epidemic, rng);
    d.sampled_action = d.executed_action;
    d.action_confidence = 1.0;
    return d;
  }

  double step(const Decision& d, Rng& env_rng) {
    return epidemic_step(state_, d.executed_action, cfg_.epidemic, env_rng).reward;
  }

  double short_term() const { return epidemic_short_term(state_.window); }
  double long_term(bool) const { return epidemic_long_term(state_); }

  const SocialGraph& graph() const { return graph_; }

 private:
  const ExperimentConfig& cfg_;
  SocialGraph graph_;
  EpidemicState state_;
};

// ---------------------------------------------------------------------------
// Training: collect massaged trajectories, attach fairness signals, estimate
// advantages, regularize, update.

namespace detail {

inline double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0
                    : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

inline BaselineKind baseline_kind(AgentId agent) {
  switch (agent) {
    case AgentId::kEo: return BaselineKind::kEoThreshold;
    case AgentId::kGreedy: return BaselineKind::kGreedyAttention;
    case AgentId::kMax: return BaselineKind::kMaxVaccinate;
    case AgentId::kRandom: return BaselineKind::kUniformRandom;
    default: throw ContractError("baseline_kind: not a rule-based agent");
  }
}

}  // namespace detail

// Threshold used when evaluating a trained policy: the schedule's value at
// the last training iteration, its largest point for every supported kind.
inline double evaluation_threshold(const ExperimentConfig& cfg) {
  if (!cfg.massaging_enabled()) return 0.0;
  return schedule_threshold(cfg.schedule, std::max(0, cfg.iterations - 1));
}

template <typename Adapter>
TrainingResult run_training_with(Adapter& env, const ExperimentConfig& cfg,
                                 std::uint64_t master_seed) {
  cfg.validate();
  require(cfg.is_learning_agent(), "run_training: agent is rule-based, nothing to train");

  Rng init_rng(derive_seed(master_seed, kStreamPolicyInit));
  Rng env_rng(derive_seed(master_seed, kStreamEnv));
  Rng policy_rng(derive_seed(master_seed, kStreamCollect));
  Rng update_rng(derive_seed(master_seed, kStreamUpdate));

  TrainingResult result;
  result.seed = master_seed;
  result.config_hash = cfg.config_hash;
  result.actor_critic = make_actor_critic(env.state_dim(), env.action_dim(), cfg.hidden,
                                          init_rng);
  ActorCritic& ac = result.actor_critic;
  const double lambda = cfg.effective_reg_weight();

  for (int iteration = 0; iteration < cfg.iterations; ++iteration) {
    try {
      const double threshold =
          cfg.massaging_enabled() ? schedule_threshold(cfg.schedule, iteration) : 0.0;

      TrajectoryBatch batch;
      std::vector<std::vector<double>> bootstrap_obs;
      std::vector<double> shorts, longs, rewards;
      batch.episode_starts.push_back(0);
      env.reset(env_rng);
      int steps_in_episode = 0;

      for (int t = 0; t < cfg.ppo.steps_per_iteration; ++t) {
        if (steps_in_episode == env.episode_length()) {
          bootstrap_obs.push_back(env.encode());
          env.reset(env_rng);
          batch.episode_starts.push_back(static_cast<size_t>(t));
          steps_in_episode = 0;
        }
        Transition tr;
        tr.state_encoding = env.encode();
        const std::vector<double> probs = policy_probs(ac, tr.state_encoding);
        const Decision d = env.decide(probs, policy_rng, cfg.massaging_enabled(), threshold);
        if (d.altered) {
          require(d.probability_gap < threshold,
                  "run_training: altered action violates the confidence-gap constraint");
          result.audit.push_back({iteration, d.probability_gap, threshold, false});
        }
        const double long_before = env.long_term(false);
        tr.reward = env.step(d, env_rng);
        const double short_now = env.short_term();
        const double long_after = env.long_term(false);
        tr.sampled_action = d.sampled_action;
        tr.executed_action = d.executed_action;
        tr.action_weights = d.action_weights;
        tr.action_confidence = d.action_confidence;
        tr.executed_log_prob = d.executed_log_prob;
        tr.regularizer_value =
            regularizer({short_now, long_before, long_after}, cfg.ppo.reg_delta);
        tr.done = false;
        tr.validate();
        batch.transitions.push_back(std::move(tr));
        shorts.push_back(short_now);
        longs.push_back(long_after);
        rewards.push_back(batch.transitions.back().reward);
        ++steps_in_episode;
      }
      bootstrap_obs.push_back(env.encode());

      batch.values.reserve(batch.transitions.size());
      for (const auto& tr : batch.transitions)
        batch.values.push_back(value_estimate(ac, tr.state_encoding));
      for (const auto& obs : bootstrap_obs)
        batch.bootstrap_values.push_back(value_estimate(ac, obs));

      compute_gae(batch, cfg.ppo);
      apply_regularizer(batch, lambda);
      const UpdateDiagnostics diag = ppo_update(ac, batch, cfg.ppo, update_rng, iteration);

      result.iterations.push_back({iteration, detail::mean_of(rewards),
                                   detail::mean_of(shorts), detail::std_of(shorts),
                                   detail::mean_of(longs), diag.policy_loss, diag.value_loss,
                                   diag.clip_fraction, diag.mean_ratio, threshold});
    } catch (const NumericError& e) {
      throw NumericError("training aborted at iteration " + std::to_string(iteration) +
                         " (config " + cfg.config_hash + "): " + e.what());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation: fresh seeded environments, fixed policy, massaging at the
// final schedule threshold for the full algorithm.

template <typename Adapter>
EvalResult run_evaluation_with(Adapter& env, const ExperimentConfig& cfg,
                               const ActorCritic* ac, std::uint64_t master_seed) {
  cfg.validate();
  if (cfg.is_learning_agent())
    require(ac != nullptr, "run_evaluation: learning agent needs a trained policy");

  EvalResult result;
  const double threshold = evaluation_threshold(cfg);
  for (int episode = 0; episode < cfg.eval_episodes; ++episode) {
    const std::uint64_t episode_seed =
        derive_seed(master_seed, kStreamEvalEpisode, static_cast<std::uint64_t>(episode));
    Rng env_rng(derive_seed(episode_seed, kStreamEvalEnv));
    Rng policy_rng(derive_seed(episode_seed, kStreamEvalPolicy));

    EvalEpisode record;
    record.seed = episode_seed;
    record.config_hash = cfg.config_hash;
    env.reset(env_rng);
    double utility = 0.0;
    for (int t = 0; t < env.episode_length(); ++t) {
      Decision d;
      if (cfg.is_learning_agent()) {
        const std::vector<double> probs = policy_probs(*ac, env.encode());
        d = env.decide(probs, policy_rng, cfg.massaging_enabled(), threshold);
        if (d.altered) {
          require(d.probability_gap < threshold,
                  "run_evaluation: altered action violates the confidence-gap constraint");
          result.audit.push_back({-1, d.probability_gap, threshold, true});
        }
      } else {
        d = env.decide_baseline(detail::baseline_kind(cfg.agent), policy_rng);
      }
      const double reward = env.step(d, env_rng);
      utility += reward;
      record.steps.push_back({reward, env.short_term(), env.long_term(true), utility});
    }
    result.episodes.push_back(std::move(record));
  }
  return result;
}

// Dispatch helpers so callers do not need the adapter types.
inline TrainingResult run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.environment) {
    case EnvironmentId::kLending: {
      LendingAdapter env(cfg);
      return run_training_with(env, cfg, seed);
    }
    case EnvironmentId::kAttention: {
      AttentionAdapter env(cfg);
      return run_training_with(env, cfg, seed);
    }
    case EnvironmentId::kEpidemic: {
      EpidemicAdapter env(cfg);
      return run_training_with(env, cfg, seed);
    }
  }
  throw ContractError("run_training: unknown environment");
}

inline EvalResult run_evaluation(const ExperimentConfig& cfg, const ActorCritic* ac,
                                 std::uint64_t seed) {
  switch (cfg.environment) {
    case EnvironmentId::kLending: {
      LendingAdapter env(cfg);
      return run_evaluation_with(env, cfg, ac, seed);
    }
    case EnvironmentId::kAttention: {
      AttentionAdapter env(cfg);
      return run_evaluation_with(env, cfg, ac, seed);
    }
    case EnvironmentId::kEpidemic: {
      EpidemicAdapter env(cfg);
      return run_evaluation_with(env, cfg, ac, seed);
    }
  }
  throw ContractError("run_evaluation: unknown environment");
}

// ---------------------------------------------------------------------------
// Policy persistence: one header line describing the network, then one
// parameter per line.

inline void save_policy(const std::string& path, const nn::NetworkSpec& spec,
                        const nn::ParameterVector& params) {
  spec.validate();
  require(static_cast<int>(params.size()) == spec.parameter_count(),
          "save_policy: parameter count does not match spec");
  std::ofstream out(path);
  require(static_cast<bool>(out), "save_policy: cannot write " + path);
  out << "layers";
  for (int s : spec.layer_sizes) out << ' ' << s;
  out << " activation " << (spec.activation == nn::Activation::kTanh ? "tanh" : "relu");
  out << " head " << (spec.head == nn::OutputHead::kSoftmax ? "softmax" : "scalar") << '\n';
  char buf[64];
  for (double v : params) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << '\n';
  }
  require(static_cast<bool>(out), "save_policy: write failed for " + path);
}

inline std::pair<nn::NetworkSpec, nn::ParameterVector> load_policy(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "load_policy: cannot open " + path);
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), "load_policy: missing header line");
  std::istringstream hs(header);
  std::string token;
  hs >> token;
  require(token == "layers", "load_policy: header must start with 'layers'");

  nn::NetworkSpec spec;
  std::vector<std::string> rest;
  while (hs >> token) rest.push_back(token);
  size_t i = 0;
  while (i < rest.size() && rest[i] != "activation") {
    try {
      spec.layer_sizes.push_back(std::stoi(rest[i]));
    } catch (const std::exception&) {
      throw ContractError("load_policy: bad layer size '" + rest[i] + "'");
    }
    ++i;
  }
  require(i + 3 < rest.size() && rest[i] == "activation" && rest[i + 2] == "head",
          "load_policy: malformed header");
  const std::string& act = rest[i + 1];
  const std::string& head = rest[i + 3];
  if (act == "tanh") spec.activation = nn::Activation::kTanh;
  else if (act == "relu") spec.activation = nn::Activation::kRelu;
  else throw ContractError("load_policy: unknown activation '" + act + "'");
  if (head == "softmax") spec.head = nn::OutputHead::kSoftmax;
  else if (head == "scalar") spec.head = nn::OutputHead::kScalar;
  else throw ContractError("load_policy: unknown head '" + head + "'");
  spec.validate();

  nn::ParameterVector params;
  params.reserve(static_cast<size_t>(spec.parameter_count()));
  double v;
  while (in >> v) params.push_back(v);
  require(static_cast<int>(params.size()) == spec.parameter_count(),
          "load_policy: expected " + std::to_string(spec.parameter_count()) +
              " parameters, found " + std::to_string(params.size()));
  return {spec, params};
}

// ---------------------------------------------------------------------------
// Output emission.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "emit_outputs: cannot write " + path);
  out << content;
  require(static_cast<bool>(out), "emit_outputs: write failed for " + path);
}

inline void probe_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ContractError("emit_outputs: output directory is not writable: " +
                                  dir.string());
  }
  std::filesystem::remove(probe, ec);
}

struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline SeriesStats aggregate_series(const std::vector<std::vector<double>>& series) {
  SeriesStats out;
  if (series.empty()) return out;
  const size_t len = series.front().size();
  for (const auto& s : series)
    require(s.size() == len, "emit_outputs: evaluation series lengths differ");
  out.mean.assign(len, 0.0);
  out.stddev.assign(len, 0.0);
  for (size_t t = 0; t < len; ++t) {
    std::vector<double> column;
    column.reserve(series.size());
    for (const auto& s : series) column.push_back(s[t]);
    out.mean[t] = mean_of(column);
    out.stddev[t] = std_of(column);
  }
  return out;
}

inline std::vector<std::vector<double>> pick(const std::vector<EvalEpisode>& episodes,
                                             double StepRecord::* field) {
  std::vector<std::vector<double>> out;
  for (const auto& ep : episodes) {
    std::vector<double> series;
    series.reserve(ep.steps.size());
    for (const auto& s : ep.steps) series.push_back(s.*field);
    out.push_back(std::move(series));
  }
  return out;
}

inline std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_runs_aggregate_and_plots(const std::vector<EvalEpisode>& episodes,
                                           const std::filesystem::path& dir) {
  for (const auto& ep : episodes) {
    std::string csv = "t,reward,short_term,long_term,utility\n";
    for (size_t t = 0; t < ep.steps.size(); ++t) {
      const auto& s = ep.steps[t];
      csv += std::to_string(t) + ',' + format_double(s.reward) + ',' +
             format_double(s.short_term) + ',' + format_double(s.long_term) + ',' +
             format_double(s.utility) + '\n';
    }
    write_text_file((dir / ("run_" + std::to_string(ep.seed) + ".csv")).string(), csv);
  }

  const auto reward = aggregate_series(pick(episodes, &StepRecord::reward));
  const auto shortt = aggregate_series(pick(episodes, &StepRecord::short_term));
  const auto longt = aggregate_series(pick(episodes, &StepRecord::long_term));
  const auto utility = aggregate_series(pick(episodes, &StepRecord::utility));

  std::string agg =
      "t,reward_mean,reward_std,short_term_mean,short_term_std,long_term_mean,"
      "long_term_std,utility_mean,utility_std\n";
  for (size_t t = 0; t < reward.mean.size(); ++t) {
    agg += std::to_string(t);
    for (const auto* s : {&reward, &shortt, &longt, &utility}) {
      agg += ',' + format_double(s->mean[t]) + ',' + format_double(s->stddev[t]);
    }
    agg += '\n';
  }
  write_text_file((dir / "aggregate.csv").string(), agg);

  const auto write_plot = [&](const char* name, const SeriesStats& s) {
    std::string dat;
    for (size_t t = 0; t < s.mean.size(); ++t)
      dat += std::to_string(t) + ' ' + format_double(s.mean[t]) + ' ' +
             format_double(s.stddev[t]) + '\n';
    write_text_file((dir / name).string(), dat);
  };
  write_plot("plot_reward.dat", reward);
  write_plot("plot_short_term.dat", shortt);
  write_plot("plot_long_term.dat", longt);
  write_plot("plot_utility.dat", utility);
}

}  // namespace detail

// Writes per-episode CSVs, the cross-episode aggregate, per-panel plot data,
// per-seed training curves, and the manifest. Everything but the manifest
// timestamp is byte-deterministic.
inline void emit_outputs(const std::vector<EvalEpisode>& episodes,
                         const std::vector<TrainingResult>& trainings,
                         const ExperimentConfig& cfg, const std::string& out_dir) {
  require(!episodes.empty(), "emit_outputs: no evaluation records");
  const std::filesystem::path dir(out_dir);
  detail::probe_writable(dir);

  detail::write_runs_aggregate_and_plots(episodes, dir);

  for (const auto& tr : trainings) {
    std::string csv =
        "iteration,mean_reward,short_term_mean,short_term_std,long_term_mean,policy_loss,"
        "value_loss,clip_fraction,mean_ratio,threshold\n";
    for (const auto& row : tr.iterations) {
      csv += std::to_string(row.iteration);
      for (double v : {row.mean_reward, row.short_term_mean, row.short_term_std,
                       row.long_term_mean, row.policy_loss, row.value_loss,
                       row.clip_fraction, row.mean_ratio, row.threshold})
        csv += ',' + detail::format_double(v);
      csv += '\n';
    }
    detail::write_text_file((dir / ("training_" + std::to_string(tr.seed) + ".csv")).string(),
                            csv);
  }

  if (!trainings.empty()) {
    const size_t iters = trainings.front().iterations.size();
    std::string dat;
    for (size_t i = 0; i < iters; ++i) {
      std::vector<double> means, stds;
      for (const auto& tr : trainings) {
        require(tr.iterations.size() == iters,
                "emit_outputs: training series lengths differ across seeds");
        means.push_back(tr.iterations[i].short_term_mean);
        stds.push_back(tr.iterations[i].short_term_std);
      }
      dat += std::to_string(i) + ' ' + detail::format_double(detail::mean_of(means)) + ' ' +
             detail::format_double(detail::mean_of(stds)) + '\n';
    }
    detail::write_text_file((dir / "plot_train_short_term.dat").string(), dat);
  }

  nlohmann::json manifest;
  manifest["config_hash"] = cfg.config_hash;
  manifest["environment"] = environment_name(cfg.environment);
  manifest["agent"] = agent_name(cfg.agent);
  manifest["seeds"] = cfg.seeds;
  std::vector<std::uint64_t> eval_seeds;
  for (const auto& ep : episodes) eval_seeds.push_back(ep.seed);
  manifest["eval_seeds"] = eval_seeds;
  manifest["version"] = kFairlabVersion;
  manifest["compiler"] = __VERSION__;
  manifest["timestamp"] = detail::timestamp_utc();
  detail::write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Whole experiments: train (when the agent learns) and evaluate per seed,
// then emit everything.

struct ExperimentResult {
  std::vector<TrainingResult> trainings;
  std::vector<EvalEpisode> episodes;
  std::vector<AuditEntry> audit;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool emit = true) {
  cfg.validate();
  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds) {
    const ActorCritic* policy = nullptr;
    if (cfg.is_learning_agent()) {
      result.trainings.push_back(run_training(cfg, seed));
      policy = &result.trainings.back().actor_critic;
      for (const auto& a : result.trainings.back().audit) result.audit.push_back(a);
    }
    EvalResult eval = run_evaluation(cfg, policy, seed);
    for (auto& ep : eval.episodes) result.episodes.push_back(std::move(ep));
    for (const auto& a : eval.audit) result.audit.push_back(a);
  }
  if (emit) {
    emit_outputs(result.episodes, result.trainings, cfg, cfg.output_dir);
    for (const auto& tr : result.trainings)
      save_policy((std::filesystem::path(cfg.output_dir) /
                   ("policy_" + std::to_string(tr.seed) + ".txt"))
                      .string(),
                  tr.actor_critic.policy_spec, tr.actor_critic.policy_params);
  }
  return result;
}

// Evaluation of a previously saved policy file.
inline ExperimentResult run_saved_policy_evaluation(const ExperimentConfig& cfg,
                                                    const std::string& policy_path,
                                                    bool emit = true) {
  cfg.validate();
  require(cfg.is_learning_agent(),
          "eval: config selects a rule-based agent, which has no policy file");
  auto [spec, params] = load_policy(policy_path);
  ActorCritic ac;
  ac.policy_spec = spec;
  ac.policy_params = params;
  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds) {
    EvalResult eval = run_evaluation(cfg, &ac, seed);
    for (auto& ep : eval.episodes) result.episodes.push_back(std::move(ep));
    for (const auto& a : eval.audit) result.audit.push_back(a);
  }
  if (emit) emit_outputs(result.episodes, {}, cfg, cfg.output_dir);
  return result;
}

// Recomputes aggregate.csv and the plot files from run_*.csv files already
// on disk.
inline void rebuild_report(const std::string& in_dir) {
  std::vector<std::filesystem::path> files;
  require(std::filesystem::is_directory(in_dir), "report: not a directory: " + in_dir);
  for (const auto& entry : std::filesystem::directory_iterator(in_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run_", 0) == 0 && name.size() > 8 &&
        name.substr(name.size() - 4) == ".csv")
      files.push_back(entry.path());
  }
  require(!files.empty(), "report: no run_*.csv files in " + in_dir);
  std::sort(files.begin(), files.end());

  std::vector<EvalEpisode> episodes;
  for (const auto& path : files) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "report: cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "report: empty file " + path.string());
    require(line == "t,reward,short_term,long_term,utility",
            "report: unexpected header in " + path.string());
    EvalEpisode ep;
    const std::string stem = path.stem().string();
    try {
      ep.seed = std::stoull(stem.substr(4));
    } catch (const std::exception&) {
      throw ContractError("report: cannot parse seed from " + path.string());
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      StepRecord s;
      long t = 0;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      require(static_cast<bool>(ls >> t >> s.reward >> s.short_term >> s.long_term >>
                                s.utility),
              "report: malformed row in " + path.string());
      ep.steps.push_back(s);
    }
    require(!ep.steps.empty(), "report: no rows in " + path.string());
    episodes.push_back(std::move(ep));
  }

  detail::probe_writable(in_dir);
  detail::write_runs_aggregate_and_plots(episodes, in_dir);
}

}  // namespace fairlab
