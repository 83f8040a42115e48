#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairlab/common.hpp"
#include "fairlab/envs/attention.hpp"
#include "fairlab/envs/epidemic.hpp"
#include "fairlab/envs/lending.hpp"
#include "fairlab/fairness.hpp"
#include "fairlab/ppo.hpp"

// Experiment files: a single JSON tree selecting the environment and agent,
// with optional blocks overriding trainer, schedule, and environment
// defaults. Unknown keys are rejected so typos fail loudly.

namespace fairlab {

enum class EnvironmentId { kLending, kAttention, kEpidemic };
enum class AgentId { kPpo, kFppo, kFppoL, kEo, kGreedy, kMax, kRandom };

inline std::string environment_name(EnvironmentId id) {
  switch (id) {
    case EnvironmentId::kLending: return "lending";
    case EnvironmentId::kAttention: return "attention";
    case EnvironmentId::kEpidemic: return "epidemic";
  }
  return "?";
}

inline std::string agent_name(AgentId id) {
  switch (id) {
    case AgentId::kPpo: return "ppo";
    case AgentId::kFppo: return "f-ppo";
    case AgentId::kFppoL: return "f-ppo-l";
    case AgentId::kEo: return "eo";
    case AgentId::kGreedy: return "greedy";
    case AgentId::kMax: return "max";
    case AgentId::kRandom: return "random";
  }
  return "?";
}

struct ExperimentConfig {
  EnvironmentId environment = EnvironmentId::kLending;
  AgentId agent = AgentId::kFppo;
  int iterations = 50;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "out";
  PpoConfig ppo;
  int hidden = 32;
  ThresholdSchedule schedule;
  LendingConfig lending;
  AttentionConfig attention;
  EpidemicConfig epidemic;
  std::string config_hash = "0";  // stamped when parsed from JSON

  bool is_learning_agent() const {
    return agent == AgentId::kPpo || agent == AgentId::kFppo || agent == AgentId::kFppoL;
  }

  // Massaging is part of the full algorithm only; the plain and
  // long-term-only variants never alter actions.
  bool massaging_enabled() const { return agent == AgentId::kFppo; }

  double effective_reg_weight() const {
    if (agent == AgentId::kFppo || agent == AgentId::kFppoL) return ppo.reg_weight;
    return 0.0;
  }

  void validate() const {
    require(iterations >= 1, "ExperimentConfig: iterations >= 1");
    require(eval_episodes >= 1, "ExperimentConfig: eval episodes >= 1");
    require(!seeds.empty(), "ExperimentConfig: seeds must be non-empty");
    require(!output_dir.empty(), "ExperimentConfig: output dir must be non-empty");
    require(hidden >= 1, "ExperimentConfig: hidden width >= 1");
    ppo.validate();
    schedule.validate();
    switch (environment) {
      case EnvironmentId::kLending: lending.validate(); break;
      case EnvironmentId::kAttention: attention.validate(); break;
      case EnvironmentId::kEpidemic: epidemic.validate(); break;
    }
    if (agent == AgentId::kEo)
      require(environment == EnvironmentId::kLending,
              "ExperimentConfig: the eo agent only fits the lending environment");
    if (agent == AgentId::kGreedy)
      require(environment == EnvironmentId::kAttention,
              "ExperimentConfig: the greedy agent only fits the attention environment");
    if (agent == AgentId::kMax)
      require(environment == EnvironmentId::kEpidemic,
              "ExperimentConfig: the max agent only fits the epidemic environment");
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  require(obj.is_object(), "config: " + where + " must be an object");
  for (const auto& item : obj.items())
    require(allowed.count(item.key()) > 0,
            "config: unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ContractError(std::string("config: key '") + key + "' has the wrong type");
  }
}

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

// Per-environment defaults for everything the file leaves unsaid: the
// trainer block, the massaging-threshold schedule, and the regularizer
// weight and tolerance.
inline void apply_environment_defaults(ExperimentConfig& cfg) {
  switch (cfg.environment) {
    case EnvironmentId::kLending:
      cfg.ppo.steps_per_iteration = cfg.lending.episode_length;
      cfg.ppo.reg_weight = 1.0;
      cfg.ppo.reg_delta = 0.05;
      cfg.ppo.policy_lr = 3e-3;
      cfg.ppo.value_lr = 3e-3;
      cfg.hidden = 32;
      cfg.schedule = {ScheduleKind::kLendingDecay, 0.0, 0.5, 0.35, 17, 0.985};
      break;
    case EnvironmentId::kAttention:
      cfg.ppo.steps_per_iteration = cfg.attention.episode_length;
      cfg.ppo.reg_weight = 1.0;
      cfg.ppo.reg_delta = 0.05;
      cfg.hidden = 64;
      cfg.schedule = {ScheduleKind::kStatic, 0.08, 0.5, 0.35, 0, 1.0};
      break;
    case EnvironmentId::kEpidemic:
      cfg.ppo.steps_per_iteration = cfg.epidemic.episode_length;
      cfg.ppo.reg_weight = 0.25;
      cfg.ppo.reg_delta = 0.05;
      cfg.hidden = 64;
      cfg.schedule = {ScheduleKind::kEpidemicGrowth, 0.0, 0.01, 0.35, 50, 1.2};
      break;
  }
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& root) {
  detail::check_keys(root, {"environment", "agent", "iterations", "eval_episodes", "seeds",
                            "output_dir", "ppo", "schedule", "lending", "attention",
                            "epidemic"},
                     "the top level");
  require(root.contains("environment"), "config: missing required key 'environment'");

  ExperimentConfig cfg;
  std::string env_name;
  detail::read(root, "environment", env_name);
  if (env_name == "lending") cfg.environment = EnvironmentId::kLending;
  else if (env_name == "attention") cfg.environment = EnvironmentId::kAttention;
  else if (env_name == "epidemic") cfg.environment = EnvironmentId::kEpidemic;
  else throw ContractError("config: unknown environment '" + env_name + "'");

  if (root.contains("lending")) {
    const auto& block = root.at("lending");
    detail::check_keys(block, {"score_buckets", "initial_mass_plus", "initial_mass_minus",
                               "mass_shift", "loan_amount", "interest",
                               "default_probabilities", "window", "episode_length"},
                       "'lending'");
    detail::read(block, "score_buckets", cfg.lending.score_buckets);
    detail::read(block, "initial_mass_plus", cfg.lending.initial_mass_plus);
    detail::read(block, "initial_mass_minus", cfg.lending.initial_mass_minus);
    detail::read(block, "mass_shift", cfg.lending.mass_shift);
    detail::read(block, "loan_amount", cfg.lending.loan_amount);
    detail::read(block, "interest", cfg.lending.interest);
    detail::read(block, "default_probabilities", cfg.lending.default_probabilities);
    detail::read(block, "window", cfg.lending.window);
    detail::read(block, "episode_length", cfg.lending.episode_length);
  }
  if (root.contains("attention")) {
    const auto& block = root.at("attention");
    detail::check_keys(block, {"locations", "units", "increase_rates", "rates_seed",
                               "decrease_rate", "initial_rates", "discover_weight",
                               "miss_weight", "history", "window", "episode_length"},
                       "'attention'");
    detail::read(block, "locations", cfg.attention.locations);
    detail::read(block, "units", cfg.attention.units);
    detail::read(block, "increase_rates", cfg.attention.increase_rates);
    detail::read(block, "rates_seed", cfg.attention.rates_seed);
    detail::read(block, "decrease_rate", cfg.attention.decrease_rate);
    detail::read(block, "initial_rates", cfg.attention.initial_rates);
    detail::read(block, "discover_weight", cfg.attention.discover_weight);
    detail::read(block, "miss_weight", cfg.attention.miss_weight);
    detail::read(block, "history", cfg.attention.history);
    detail::read(block, "window", cfg.attention.window);
    detail::read(block, "episode_length", cfg.attention.episode_length);
  }
  if (root.contains("epidemic")) {
    const auto& block = root.at("epidemic");
    detail::check_keys(block, {"infection_factor", "recovery_factor", "initial_infected",
                               "vertex_count", "mean_degree", "rewire_prob", "graph_seed",
                               "graph_file", "window", "episode_length"},
                       "'epidemic'");
    detail::read(block, "infection_factor", cfg.epidemic.infection_factor);
    detail::read(block, "recovery_factor", cfg.epidemic.recovery_factor);
    detail::read(block, "initial_infected", cfg.epidemic.initial_infected);
    detail::read(block, "vertex_count", cfg.epidemic.vertex_count);
    detail::read(block, "mean_degree", cfg.epidemic.mean_degree);
    detail::read(block, "rewire_prob", cfg.epidemic.rewire_prob);
    detail::read(block, "graph_seed", cfg.epidemic.graph_seed);
    detail::read(block, "graph_file", cfg.epidemic.graph_file);
    detail::read(block, "window", cfg.epidemic.window);
    detail::read(block, "episode_length", cfg.epidemic.episode_length);
  }

  apply_environment_defaults(cfg);

  std::string agent = "f-ppo";
  detail::read(root, "agent", agent);
  if (agent == "ppo") cfg.agent = AgentId::kPpo;
  else if (agent == "f-ppo") cfg.agent = AgentId::kFppo;
  else if (agent == "f-ppo-l") cfg.agent = AgentId::kFppoL;
  else if (agent == "eo") cfg.agent = AgentId::kEo;
  else if (agent == "greedy") cfg.agent = AgentId::kGreedy;
  else if (agent == "max") cfg.agent = AgentId::kMax;
  else if (agent == "random") cfg.agent = AgentId::kRandom;
  else throw ContractError("config: unknown agent '" + agent + "'");

  detail::read(root, "iterations", cfg.iterations);
  detail::read(root, "eval_episodes", cfg.eval_episodes);
  detail::read(root, "seeds", cfg.seeds);
  detail::read(root, "output_dir", cfg.output_dir);

  if (root.contains("ppo")) {
    const auto& block = root.at("ppo");
    detail::check_keys(block, {"discount", "gae_lambda", "clip", "epochs", "minibatch",
                               "policy_lr", "value_lr", "steps_per_iteration", "reg_weight",
                               "reg_delta", "entropy_coef", "normalize_advantages", "hidden"},
                       "'ppo'");
    detail::read(block, "discount", cfg.ppo.discount);
    detail::read(block, "gae_lambda", cfg.ppo.gae_lambda);
    detail::read(block, "clip", cfg.ppo.clip);
    detail::read(block, "epochs", cfg.ppo.epochs);
    detail::read(block, "minibatch", cfg.ppo.minibatch_size);
    detail::read(block, "policy_lr", cfg.ppo.policy_lr);
    detail::read(block, "value_lr", cfg.ppo.value_lr);
    detail::read(block, "steps_per_iteration", cfg.ppo.steps_per_iteration);
    detail::read(block, "reg_weight", cfg.ppo.reg_weight);
    detail::read(block, "reg_delta", cfg.ppo.reg_delta);
    detail::read(block, "entropy_coef", cfg.ppo.entropy_coef);
    detail::read(block, "normalize_advantages", cfg.ppo.normalize_advantages);
    detail::read(block, "hidden", cfg.hidden);
  }
  if (root.contains("schedule")) {
    const auto& block = root.at("schedule");
    detail::check_keys(block, {"kind", "value", "tau_start", "tau_end", "start_iteration",
                               "growth"},
                       "'schedule'");
    std::string kind;
    detail::read(block, "kind", kind);
    if (kind == "static") cfg.schedule.kind = ScheduleKind::kStatic;
    else if (kind == "lending_decay") cfg.schedule.kind = ScheduleKind::kLendingDecay;
    else if (kind == "epidemic_growth") cfg.schedule.kind = ScheduleKind::kEpidemicGrowth;
    else if (!kind.empty()) throw ContractError("config: unknown schedule kind '" + kind + "'");
    detail::read(block, "value", cfg.schedule.value);
    detail::read(block, "tau_start", cfg.schedule.tau_start);
    detail::read(block, "tau_end", cfg.schedule.tau_end);
    detail::read(block, "start_iteration", cfg.schedule.start_iteration);
    detail::read(block, "growth", cfg.schedule.growth);
  }

  cfg.config_hash = detail::fnv1a_hex(root.dump());
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "config: cannot open " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("config: invalid JSON in ") + path + ": " + e.what());
  }
  return parse_experiment_config(root);
}

}  // namespace fairlab
