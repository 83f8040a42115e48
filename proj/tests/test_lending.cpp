#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include <fairlab/envs/lending.hpp>

using namespace fairlab;

namespace {

LendingConfig two_bucket_config() {
  LendingConfig config;
  config.score_buckets = 2;
  config.initial_mass_plus = {0.5, 0.5};
  config.initial_mass_minus = {0.6, 0.4};
  config.mass_shift = 0.1;
  config.window = 10;
  config.episode_length = 16;
  return config;
}

double mass_sum(const std::vector<double>& mass) {
  return std::accumulate(mass.begin(), mass.end(), 0.0);
}

}  // namespace

TEST_CASE("lending reset is deterministic in the seed") {
  const LendingConfig config;
  Rng a(42), b(42);
  const auto sa = lending_reset(config, a);
  const auto sb = lending_reset(config, b);
  REQUIRE(sa.applicant_group == sb.applicant_group);
  REQUIRE(sa.applicant_score == sb.applicant_score);
  REQUIRE(sa.applicant_will_repay == sb.applicant_will_repay);
  REQUIRE(sa.cash == 0.0);
  REQUIRE(sa.mass_plus == config.initial_mass_plus);
  REQUIRE(sa.mass_minus == config.initial_mass_minus);
}

TEST_CASE("lending groups are sampled uniformly") {
  const LendingConfig config;
  Rng rng(7);
  int advantaged = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    if (lending_reset(config, rng).applicant_group == 0) ++advantaged;
  REQUIRE(std::abs(advantaged / static_cast<double>(trials) - 0.5) < 0.02);
}

TEST_CASE("initial long-term gap equals the configured mass distance") {
  const LendingConfig config;
  Rng rng(1);
  const auto state = lending_reset(config, rng);
  REQUIRE(lending_long_term(state, config) ==
          Catch::Approx(wasserstein_1d(config.initial_mass_plus, config.initial_mass_minus))
              .margin(1e-12));
}

TEST_CASE("default probability interpolates from 0.9 down to 0.1") {
  const LendingConfig config;
  REQUIRE(default_probability(1, config) == Catch::Approx(0.9));
  REQUIRE(default_probability(config.score_buckets, config) == Catch::Approx(0.1));
  for (int b = 1; b < config.score_buckets; ++b)
    REQUIRE(default_probability(b + 1, config) <= default_probability(b, config));
  REQUIRE_THROWS_AS(default_probability(0, config), ContractError);
  REQUIRE_THROWS_AS(default_probability(8, config), ContractError);

  LendingConfig custom;
  custom.default_probabilities = {0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2};
  REQUIRE(default_probability(2, custom) == 0.7);
}

TEST_CASE("deny leaves the distributions alone and pays nothing") {
  const auto config = two_bucket_config();
  Rng rng(3);
  auto state = lending_reset(config, rng);
  const auto plus = state.mass_plus;
  const auto minus = state.mass_minus;
  const double reward = lending_step(state, 0, config, rng);
  REQUIRE(reward == 0.0);
  REQUIRE(state.cash == 0.0);
  REQUIRE(state.mass_plus == plus);
  REQUIRE(state.mass_minus == minus);
}

TEST_CASE("approved repayment moves mass upward") {
  const auto config = two_bucket_config();
  Rng rng(3);
  auto state = lending_reset(config, rng);
  state.applicant_group = 0;
  state.applicant_score = 1;
  state.applicant_will_repay = true;
  const double reward = lending_step(state, 1, config, rng);
  REQUIRE(reward == Catch::Approx(config.loan_amount * config.interest));
  REQUIRE(state.mass_plus[0] == Catch::Approx(0.4));
  REQUIRE(state.mass_plus[1] == Catch::Approx(0.6));
  REQUIRE(state.mass_minus == config.initial_mass_minus);
}

TEST_CASE("approved default costs the loan and moves mass downward") {
  const auto config = two_bucket_config();
  Rng rng(3);
  auto state = lending_reset(config, rng);
  state.applicant_group = 1;
  state.applicant_score = 2;
  state.applicant_will_repay = false;
  const double reward = lending_step(state, 1, config, rng);
  REQUIRE(reward == Catch::Approx(-config.loan_amount));
  REQUIRE(state.mass_minus[0] == Catch::Approx(0.7));
  REQUIRE(state.mass_minus[1] == Catch::Approx(0.3));
}

TEST_CASE("mass shifts at the boundary buckets are no-ops") {
  const auto config = two_bucket_config();
  Rng rng(3);
  auto state = lending_reset(config, rng);

  state.applicant_group = 0;
  state.applicant_score = 2;  // top bucket, repay cannot move up
  state.applicant_will_repay = true;
  lending_step(state, 1, config, rng);
  REQUIRE(state.mass_plus == config.initial_mass_plus);

  state.applicant_group = 0;
  state.applicant_score = 1;  // bottom bucket, default cannot move down
  state.applicant_will_repay = false;
  lending_step(state, 1, config, rng);
  REQUIRE(state.mass_plus == config.initial_mass_plus);
}

TEST_CASE("short-term gap follows the approval-rate formula") {
  CohortWindow<LendingRecord> window(64);
  // Group 0: 8 of 10 will-repay applicants approved; group 1: 6 of 10.
  for (int i = 0; i < 10; ++i) window.push({0, 3, true, i < 8, i < 8});
  for (int i = 0; i < 10; ++i) window.push({1, 3, true, i < 6, i < 6});
  REQUIRE(lending_short_term(window) == Catch::Approx(0.2));

  CohortWindow<LendingRecord> equal(64);
  for (int i = 0; i < 4; ++i) equal.push({0, 3, true, i < 2, i < 2});
  for (int i = 0; i < 4; ++i) equal.push({1, 3, true, i < 2, i < 2});
  REQUIRE(lending_short_term(equal) == 0.0);

  CohortWindow<LendingRecord> missing(64);
  for (int i = 0; i < 10; ++i) missing.push({0, 3, true, true, true});
  missing.push({1, 3, false, true, false});  // group 1 has no will-repay members
  REQUIRE(lending_short_term(missing) == 0.0);
}

TEST_CASE("denied will-repay applicants drag the rate down") {
  CohortWindow<LendingRecord> window(64);
  window.push({0, 3, true, true, true});
  window.push({0, 3, true, false, false});
  window.push({1, 3, true, true, true});
  REQUIRE(lending_short_term(window) == Catch::Approx(0.5));
}

TEST_CASE("hypothetical gap matches pushing the record by hand") {
  const auto config = two_bucket_config();
  Rng rng(9);
  auto state = lending_reset(config, rng);
  for (int i = 0; i < 30; ++i) {
    const int action = static_cast<int>(rng() % 2);
    const double predicted = lending_short_term_if_executed(state, action);
    auto copy = state.window;
    copy.push({state.applicant_group, state.applicant_score, state.applicant_will_repay,
               action == 1, action == 1 && state.applicant_will_repay});
    REQUIRE(predicted == lending_short_term(copy));
    lending_step(state, action, config, rng);
  }
}

TEST_CASE("long-term gap of point masses is a translation distance") {
  LendingConfig config;
  config.window = 8;
  Rng rng(5);
  auto state = lending_reset(config, rng);
  for (int i = 0; i < 4; ++i) {
    state.window.push({0, 3, true, true, true});
    state.window.push({1, 1, true, true, true});
  }
  REQUIRE(lending_long_term(state, config) == Catch::Approx(2.0));
}

TEST_CASE("long-term gap matches a direct CDF recomputation") {
  const LendingConfig config;
  Rng rng(13);
  auto state = lending_reset(config, rng);
  for (int i = 0; i < 200; ++i) lending_step(state, static_cast<int>(rng() % 2), config, rng);

  std::vector<double> plus(config.score_buckets, 0.0), minus(config.score_buckets, 0.0);
  double np = 0.0, nm = 0.0;
  for (const auto& r : state.window) {
    auto& hist = r.group == 0 ? plus : minus;
    auto& n = r.group == 0 ? np : nm;
    hist[r.score - 1] += 1.0;
    n += 1.0;
  }
  REQUIRE(np > 0.0);
  REQUIRE(nm > 0.0);
  double cp = 0.0, cm = 0.0, dist = 0.0;
  for (int b = 0; b < config.score_buckets; ++b) {
    cp += plus[b] / np;
    cm += minus[b] / nm;
    if (b + 1 < config.score_buckets) dist += std::abs(cp - cm);
  }
  REQUIRE(lending_long_term(state, config) == Catch::Approx(dist).margin(1e-12));
}

TEST_CASE("masses stay normalized through long random rollouts") {
  const LendingConfig config;
  Rng rng(21);
  auto state = lending_reset(config, rng);
  for (int i = 0; i < 10000; ++i) {
    lending_step(state, static_cast<int>(rng() % 2), config, rng);
    if (i % 100 == 0) {
      REQUIRE(std::abs(mass_sum(state.mass_plus) - 1.0) <= 1e-9);
      REQUIRE(std::abs(mass_sum(state.mass_minus) - 1.0) <= 1e-9);
      for (double v : state.mass_plus) REQUIRE(v >= 0.0);
      for (double v : state.mass_minus) REQUIRE(v >= 0.0);
    }
  }
  REQUIRE(std::abs(mass_sum(state.mass_plus) - 1.0) <= 1e-9);
  REQUIRE(std::abs(mass_sum(state.mass_minus) - 1.0) <= 1e-9);
}

TEST_CASE("cash matches the integer bookkeeping oracle") {
  const LendingConfig config;
  Rng rng(31);
  auto state = lending_reset(config, rng);
  int repaid = 0, defaulted = 0;
  for (int i = 0; i < 2000; ++i) {
    const bool approve = rng() % 2 == 1;
    const bool will_repay = state.applicant_will_repay;
    lending_step(state, approve ? 1 : 0, config, rng);
    if (approve && will_repay) ++repaid;
    if (approve && !will_repay) ++defaulted;
  }
  REQUIRE(state.cash ==
          Catch::Approx(repaid * config.loan_amount * config.interest -
                        defaulted * config.loan_amount)
              .margin(1e-9));
}

TEST_CASE("denying everyone freezes the live distributions") {
  const LendingConfig config;
  Rng rng(17);
  auto state = lending_reset(config, rng);
  const double initial = wasserstein_1d(state.mass_plus, state.mass_minus);
  for (int i = 0; i < 500; ++i) {
    lending_step(state, 0, config, rng);
    REQUIRE(wasserstein_1d(state.mass_plus, state.mass_minus) == initial);
  }
}

TEST_CASE("group draws do not depend on the policy") {
  const LendingConfig config;
  Rng deny_rng(77), approve_rng(77);
  auto deny_state = lending_reset(config, deny_rng);
  auto approve_state = lending_reset(config, approve_rng);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(deny_state.applicant_group == approve_state.applicant_group);
    lending_step(deny_state, 0, config, deny_rng);
    lending_step(approve_state, 1, config, approve_rng);
  }
}

TEST_CASE("state encoding is a pair of one-hots") {
  const LendingConfig config;
  Rng rng(2);
  auto state = lending_reset(config, rng);
  state.applicant_group = 1;
  state.applicant_score = 4;
  const auto enc = lending_encode(state, config);
  REQUIRE(enc.size() == 2 + static_cast<size_t>(config.score_buckets));
  REQUIRE(enc[0] == 0.0);
  REQUIRE(enc[1] == 1.0);
  REQUIRE(enc[2 + 3] == 1.0);
  REQUIRE(std::accumulate(enc.begin(), enc.end(), 0.0) == 2.0);
}

TEST_CASE("lending config validation") {
  LendingConfig bad;
  bad.initial_mass_plus[0] += 0.1;
  REQUIRE_THROWS_AS(bad.validate(), ContractError);

  LendingConfig swapped;
  std::swap(swapped.initial_mass_plus, swapped.initial_mass_minus);
  REQUIRE_THROWS_AS(swapped.validate(), ContractError);  // mean ordering flips

  LendingConfig rising;
  rising.default_probabilities = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  REQUIRE_THROWS_AS(rising.validate(), ContractError);  // must be non-increasing

  LendingConfig stray;
  stray.mass_shift = 0.0;
  REQUIRE_THROWS_AS(stray.validate(), ContractError);

  Rng rng(1);
  auto state = lending_reset(LendingConfig{}, rng);
  REQUIRE_THROWS_AS(lending_step(state, 2, LendingConfig{}, rng), ContractError);
}
