#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include <fairlab/baselines.hpp>

using namespace fairlab;

TEST_CASE("the profit cutoff lands on the break-even bucket") {
  const LendingConfig config;
  EoThresholdAgent agent(config);
  // With loan 1 and interest 0.3, expected profit is 0.3 - 1.3 * p_default;
  // the default linear table first clears zero at the top bucket.
  for (int b = 1; b < agent.base_cutoff(); ++b) {
    const double pd = default_probability(b, config);
    REQUIRE((1.0 - pd) * config.interest - pd < 0.0);
  }
  const double pd = default_probability(agent.base_cutoff(), config);
  REQUIRE((1.0 - pd) * config.interest - pd >= 0.0);
}

TEST_CASE("the lending agent approves exactly above its group cutoff") {
  const LendingConfig config;
  EoThresholdAgent agent(config);
  Rng rng(3);
  auto state = lending_reset(config, rng);
  state.applicant_group = 0;
  state.applicant_score = agent.base_cutoff();
  REQUIRE(agent.act(state, config) == 1);
  state.applicant_score = agent.base_cutoff() - 1;
  REQUIRE(agent.act(state, config) == 0);
}

TEST_CASE("a windowed rate gap lowers the lagging group's cutoff") {
  const LendingConfig config;
  EoThresholdAgent agent(config);
  Rng rng(5);
  auto state = lending_reset(config, rng);
  // Group 0 approvals lag far behind group 1.
  for (int i = 0; i < 10; ++i) state.window.push({0, 5, true, false, false});
  for (int i = 0; i < 10; ++i) state.window.push({1, 5, true, true, true});
  const int before = agent.cutoff(0);
  agent.act(state, config);
  REQUIRE(agent.cutoff(0) == before - 1);
  REQUIRE(agent.cutoff(1) == agent.base_cutoff());

  // Once the gap closes the cutoff relaxes back toward break-even.
  state.window.clear();
  for (int i = 0; i < 10; ++i) state.window.push({0, 5, true, true, true});
  for (int i = 0; i < 10; ++i) state.window.push({1, 5, true, true, true});
  agent.act(state, config);
  REQUIRE(agent.cutoff(0) == before);
}

TEST_CASE("the eo agent narrows the windowed gap on live rollouts") {
  const LendingConfig config;
  EoThresholdAgent agent(config);
  Rng rng(11);
  auto state = lending_reset(config, rng);
  for (int i = 0; i < 2000; ++i) {
    const int action = agent.act(state, config);
    lending_step(state, action, config, rng);
  }
  REQUIRE(lending_short_term(state.window) < 0.15);
}

TEST_CASE("greedy allocation is uniform when estimates tie") {
  AttentionConfig config;
  config.locations = 3;
  config.units = 3;
  config.increase_rates = {0.05, 0.05, 0.05};
  auto state = attention_reset(config);
  REQUIRE(greedy_attention_allocation(state, config) == std::vector<int>{1, 1, 1});

  // Leftover units go to the largest remainders, lowest index first on ties.
  config.units = 4;
  REQUIRE(greedy_attention_allocation(state, config) == std::vector<int>{2, 1, 1});
}

TEST_CASE("greedy allocation tracks windowed incident counts") {
  AttentionConfig config;
  config.locations = 3;
  config.units = 6;
  config.increase_rates = {0.05, 0.05, 0.05};
  auto state = attention_reset(config);
  state.incident_window.push({8, 4, 0});
  const auto allocation = greedy_attention_allocation(state, config);
  REQUIRE(allocation == std::vector<int>{4, 2, 0});
}

TEST_CASE("greedy allocations always sum to the unit budget") {
  AttentionConfig config;
  auto state = attention_reset(config);
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const auto allocation = greedy_attention_allocation(state, config);
    REQUIRE(std::accumulate(allocation.begin(), allocation.end(), 0) == config.units);
    for (int a : allocation) REQUIRE(a >= 0);
    attention_step(state, allocation, config, rng);
  }
}

TEST_CASE("max vaccination targets the most exposed susceptible") {
  SocialGraph g;
  g.vertex_count = 5;
  g.edges = {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}};
  g.community = girvan_newman_bipartition(g);
  EpidemicConfig config;
  config.vertex_count = 5;
  config.initial_infected = 1;

  EpidemicState state;
  state.graph = &g;
  state.window = CohortWindow<EpidemicRecord>(8);
  state.health = {Health::kInfected, Health::kInfected, Health::kSusceptible,
                  Health::kRecovered, Health::kSusceptible};
  // Vertex 2 touches both infected vertices; vertex 4 touches none.
  REQUIRE(max_vaccinate_action(state, config) == 2);

  state.health = {Health::kInfected, Health::kSusceptible, Health::kSusceptible,
                  Health::kRecovered, Health::kRecovered};
  // Vertices 1 and 2 both touch one infected vertex; lowest id wins.
  REQUIRE(max_vaccinate_action(state, config) == 1);

  state.health = {Health::kInfected, Health::kRecovered, Health::kRecovered,
                  Health::kRecovered, Health::kRecovered};
  REQUIRE(max_vaccinate_action(state, config) == epidemic_noop_action(config));
}

TEST_CASE("max vaccination is always legal on random states") {
  const EpidemicConfig config;
  const auto g = epidemic_graph(config);
  Rng rng(23);
  auto state = epidemic_reset(config, g, rng);
  for (int i = 0; i < 500; ++i) {
    const int action = max_vaccinate_action(state, config);
    if (action != epidemic_noop_action(config))
      REQUIRE(state.health[action] == Health::kSusceptible);
    epidemic_step(state, action, config, rng);
  }
}

TEST_CASE("uniform random lending actions are balanced") {
  const LendingConfig config;
  EoThresholdAgent agent(config);
  Rng rng(31);
  auto state = lending_reset(config, rng);
  int approvals = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    approvals += act_baseline(BaselineKind::kUniformRandom, agent, state, config, rng);
  REQUIRE(std::abs(approvals / static_cast<double>(trials) - 0.5) < 0.02);
}

TEST_CASE("uniform random attention actions stay legal") {
  const AttentionConfig config;
  auto state = attention_reset(config);
  Rng rng(37);
  for (int i = 0; i < 1000; ++i) {
    const auto allocation = act_baseline(BaselineKind::kUniformRandom, state, config, rng);
    REQUIRE(std::accumulate(allocation.begin(), allocation.end(), 0) == config.units);
    for (int a : allocation) REQUIRE(a >= 0);
  }
}

TEST_CASE("uniform random epidemic actions cover the whole range") {
  const EpidemicConfig config;
  const auto g = epidemic_graph(config);
  Rng rng(41);
  auto state = epidemic_reset(config, g, rng);
  std::vector<int> seen(config.vertex_count + 1, 0);
  for (int i = 0; i < 20000; ++i)
    seen[act_baseline(BaselineKind::kUniformRandom, state, config, rng)] += 1;
  for (int count : seen) REQUIRE(count > 0);
}

TEST_CASE("environment and kind mismatches are rejected") {
  const LendingConfig lending;
  EoThresholdAgent agent(lending);
  Rng rng(43);
  auto lending_state = lending_reset(lending, rng);
  REQUIRE_THROWS_AS(act_baseline(BaselineKind::kGreedyAttention, agent, lending_state, lending, rng),
                    ContractError);

  const AttentionConfig attention;
  auto attention_state = attention_reset(attention);
  REQUIRE_THROWS_AS(act_baseline(BaselineKind::kMaxVaccinate, attention_state, attention, rng),
                    ContractError);

  const EpidemicConfig epidemic;
  const auto g = epidemic_graph(epidemic);
  auto epidemic_state = epidemic_reset(epidemic, g, rng);
  REQUIRE_THROWS_AS(act_baseline(BaselineKind::kEoThreshold, epidemic_state, epidemic, rng),
                    ContractError);
}
