// Copyright 2026 The absorb-eq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include "absorb_eq/aux_eval.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace absorb_eq {
namespace {

StrategyProfile g1_profile(const GameSpec& game, double p_absorb = 0.5) {
  StrategyProfile profile = uniform_profile(game);
  profile.y[0] << p_absorb, 1.0 - p_absorb;
  return profile;
}

// s0: b1 absorbs with probability 1/10, otherwise stays; b2 stays.
GameSpec slow_g1() {
  GameSpec game = testing::game_g1();
  game.states[0].row(0, 0) = Eigen::Vector2d(0.9, 0.1);
  return game;
}

std::vector<double> g_bars(const AuxEvaluation& eval, StateId s) {
  std::vector<double> out;
  for (const MoveEvaluation& m : eval.moves[s]) out.push_back(m.escape_factor);
  return out;
}

// Random profile with strictly positive mixing so that the induced chain
// inherits the reachability of the game.
StrategyProfile interior_profile(std::mt19937_64& rng, const GameSpec& game) {
  StrategyProfile p;
  for (const StateSpec& st : game.states) {
    p.x.push_back(0.1 / st.num_p1() + 0.9 * testing::random_distribution(rng, st.num_p1()).array());
    p.y.push_back(0.1 / st.num_p2() + 0.9 * testing::random_distribution(rng, st.num_p2()).array());
  }
  return p;
}

TEST_SUITE("aux_eval") {

TEST_CASE("parameters are validated and K lives in log space") {
  const AuxParams p = make_aux_params(0.1, 0.05, 2.0, 3.0, 4);
  CHECK(p.log_k() == doctest::Approx(4.0 * std::log(6.0)));
  const AuxParams huge = make_aux_params(0.1, 0.05, 1e50, 1e50, 100);
  CHECK(std::isfinite(huge.log_k()));
  CHECK_THROWS_AS(make_aux_params(1.0, 0.1, 2.0, 2.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_aux_params(0.1, -0.1, 2.0, 2.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_aux_params(0.1, 0.1, 1.0, 2.0, 1), std::invalid_argument);
}

TEST_CASE("no-return probability at the threshold counts as one") {
  const GameSpec game = slow_g1();
  const AuxEvaluation eval = aux_quantities(game, g1_profile(game), make_aux_params(0.1, 0.1, 2.0, 2.0, 1));
  CHECK(eval.moves[0][0].g == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(eval.moves[0][0].scaled_escape == 1.0);
  CHECK(eval.moves[0][0].escape_factor == 1.0);
}

TEST_CASE("G1 auxiliary quantities") {
  const GameSpec game = testing::game_g1();
  const AuxEvaluation eval = aux_quantities(game, g1_profile(game), make_aux_params(0.1, 0.1, 2.0, 2.0, 1));
  const MoveEvaluation& b1 = eval.moves[0][0];
  const MoveEvaluation& b2 = eval.moves[0][1];
  CHECK(b1.scaled_escape == 1.0);
  CHECK(b2.g == 0.0);
  CHECK(b2.scaled_escape == 0.0);
  CHECK(b2.escape_factor == 0.0);
  CHECK(b2.scaled_value2 == eval.r2(0));
  CHECK(eval.aux_rate(0) == doctest::Approx(0.5));
  CHECK(eval.a(0) == doctest::Approx(0.5));
}

TEST_CASE("ordering weights") {
  const AuxParams one = make_aux_params(0.1, 0.1, 2.0, 2.0, 1);
  CHECK(ordering_weights(Eigen::VectorXd::Constant(1, 0.3), one)(0) == 1.0);
  const AuxParams two = make_aux_params(0.1, 0.1, 2.0, 2.0, 2);  // K = 16
  const Eigen::VectorXd w = ordering_weights(Eigen::Vector2d(0.1, 0.4), two);
  CHECK(w(0) == doctest::Approx(4.0));
  CHECK(w(1) == 1.0);
  const AuxParams cut = make_aux_params(0.1, 0.1, 10.0, 10.0, 1);  // K = 100
  const Eigen::VectorXd wc = ordering_weights(Eigen::Vector2d(1e-6, 1.0), cut);
  CHECK(wc(0) == doctest::Approx(100.0));
  CHECK(wc(1) == 1.0);
  // Ties keep position order and have ratio one.
  const Eigen::VectorXd tied = ordering_weights(Eigen::Vector3d(0.2, 0.2, 0.4), two);
  CHECK(tied(0) == doctest::Approx(2.0));
  CHECK(tied(1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(ordering_weights(Eigen::Vector2d(0.0, 0.4), two), std::invalid_argument);
}

TEST_CASE("G1 closed-form evaluation") {
  const GameSpec game = testing::game_g1();
  for (double delta : {0.0, 0.05, 0.1, 0.5}) {
    const AuxEvaluation eval = auxiliary_values(game, g1_profile(game), make_aux_params(0.1, delta, 2.0, 2.0, 1));
    CHECK(eval.aux_value(0) == doctest::Approx(1.0 / (1.0 + delta)).epsilon(1e-12));
    CHECK(eval.moves[0][0].aux_value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eval.moves[0][1].aux_value == doctest::Approx((1.0 - delta) / (1.0 + delta)).epsilon(1e-12));
    CHECK(eval.aux_value_max(0) == doctest::Approx(1.0));
    CHECK(eval.aux_value(1) == 1.0);
  }
}

TEST_CASE("zero discount and full absorption leave aux_value at r2") {
  const GameSpec game = testing::game_g2_choice();
  const StrategyProfile profile = uniform_profile(game);
  const AuxEvaluation eval = auxiliary_values(game, profile, make_aux_params(0.1, 0.0, 2.0, 2.0, 2));
  CHECK((eval.aux_value - eval.r2).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(auxiliary_closed_form(0.7, 3.0, 1.0, 0.4) == doctest::Approx(0.7));
}

TEST_CASE("stuck states are rejected") {
  const GameSpec game = testing::game_g1();
  const StrategyProfile stay = g1_profile(game, 0.0);
  CHECK_THROWS_AS(auxiliary_values(game, stay, make_aux_params(0.1, 0.1, 2.0, 2.0, 1)), NonAbsorbingChainError);
  CHECK_THROWS_AS(ordering_weights(Eigen::Vector2d(0.5, 0.0), make_aux_params(0.1, 0.1, 2.0, 2.0, 2)),
                  std::invalid_argument);
}

TEST_CASE("identities on random absorbing profiles") {
  std::mt19937_64 rng(51);
  int checked = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const GameSpec game = testing::random_game(rng, 3, 2, 3);
    const StrategyProfile profile = interior_profile(rng, game);
    if (!is_absorbing_chain(induce_chain(game, profile))) continue;
    const AuxParams params = make_aux_params(0.05 + 0.4 * (trial % 5) / 5.0, 0.01 * (trial % 7), 2.0, 3.0, 3);
    const AuxEvaluation eval = auxiliary_values(game, profile, params);
    CHECK(eval.identity_residual <= 1e-9);
    CHECK(eval.consistency_residual <= 1e-9);
    CHECK(eval.r2_residual <= 1e-9);
    for (StateId s : game.non_absorbing_states()) {
      CHECK(eval.a(s) <= eval.aux_rate(s) + 1e-12);
      CHECK(eval.aux_rate(s) <= eval.a(s) / params.epsilon_bar + 1e-12);
      CHECK(eval.r2(s) >= eval.aux_value(s) - 1e-12);
      CHECK(eval.order_weight(s) >= 1.0);
    }
    ++checked;
  }
  CHECK(checked > 40);
}

TEST_CASE("closed form agrees with the path expectation") {
  std::mt19937_64 rng(52);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const GameSpec game = testing::random_game(rng, 2, 2, 2);
    const StrategyProfile profile = interior_profile(rng, game);
    if (!is_absorbing_chain(induce_chain(game, profile))) continue;
    const AuxEvaluation eval = auxiliary_values(game, profile, make_aux_params(0.2, 0.1, 2.0, 2.0, 2));
    for (StateId s : game.non_absorbing_states()) {
      const double keep = 1.0 - 0.1 / eval.order_weight(s);
      for (const MoveEvaluation& m : eval.moves[s]) {
        const testing::HorizonEstimate h = testing::horizon_auxiliary(game, profile, s, m.move, g_bars(eval, s), keep, 4000);
        CHECK(h.tail <= 1e-6);
        // Truncated histories contribute at most r2 <= 1 each.
        CHECK(std::abs(m.aux_value - h.value) <= h.tail + 1e-9);
      }
      const testing::HorizonEstimate mixed = testing::horizon_auxiliary(game, profile, s, -1, g_bars(eval, s), keep, 4000);
      CHECK(std::abs(eval.aux_value(s) - mixed.value) <= mixed.tail + 1e-9);
    }
    ++checked;
  }
  CHECK(checked > 15);
}

TEST_CASE("simulation on G1") {
  const GameSpec game = testing::game_g1();
  const StrategyProfile profile = g1_profile(game);
  const AuxEvaluation eval = auxiliary_values(game, profile, make_aux_params(0.1, 0.1, 2.0, 2.0, 1));
  const MonteCarloEstimate b1 = auxiliary_monte_carlo(game, profile, eval, 0, 0, 1000, 7);
  CHECK(b1.estimate == 1.0);
  CHECK(b1.halfwidth == 0.0);
  const MonteCarloEstimate b2 = auxiliary_monte_carlo(game, profile, eval, 0, 1, 100000, 8);
  CHECK(std::abs(b2.estimate - 0.9 / 1.1) <= b2.halfwidth);
  const MonteCarloEstimate mixed = auxiliary_monte_carlo(game, profile, eval, 0, -1, 100000, 9);
  CHECK(std::abs(mixed.estimate - 1.0 / 1.1) <= mixed.halfwidth);
  CHECK(b2.truncated == 0);
  CHECK(b2.horizon == certified_horizon(game, profile, 1e-4));
  // Same seed, same estimate.
  CHECK(auxiliary_monte_carlo(game, profile, eval, 0, 1, 25000, 8).estimate ==
        auxiliary_monte_carlo(game, profile, eval, 0, 1, 25000, 8).estimate);
}

TEST_CASE("traces visit in increasing stages and stop at absorption") {
  const GameSpec game = testing::game_g2_choice();
  const StrategyProfile profile = uniform_profile(game);
  std::mt19937_64 rng(53);
  for (int run = 0; run < 200; ++run) {
    const SimulationTrace trace = simulate_trace(game, profile, 0, 1 - run % 2, rng, 50);
    for (const std::vector<int>& stages : trace.visit_stages) {
      for (size_t i = 1; i < stages.size(); ++i) CHECK(stages[i] > stages[i - 1]);
    }
    if (trace.absorbed) {
      CHECK(game.is_absorbing(trace.final_state));
      CHECK(trace.payoff2 == game.state(trace.final_state).r2);
    } else {
      CHECK(trace.steps.size() == 50);
    }
    if (run % 2 == 1) CHECK(trace.steps.front().p2_move == 0);
  }
}

TEST_CASE("monotonicity of aux_value in the weighted rate") {
  const GameSpec game = testing::game_g2_choice();
  const AuxEvaluation eval = auxiliary_values(game, uniform_profile(game), make_aux_params(0.1, 0.1, 2.0, 2.0, 2));
  const AuxMonotonicityReport same = auxiliary_monotonicity_check(eval, 0, 0, 0.0);
  CHECK(same.rate_premise);
  CHECK(same.value_premise);
  CHECK(same.holds());

  // Two states with a~ = (0.1, 0.4) and equal r2: aux_value follows w~a~.
  AuxEvaluation pair;
  pair.params = make_aux_params(0.1, 0.2, 2.0, 2.0, 2);
  pair.aux_rate = Eigen::Vector2d(0.1, 0.4);
  pair.order_weight = ordering_weights(pair.aux_rate, pair.params);
  pair.r2 = Eigen::Vector2d(0.8, 0.8);
  pair.aux_value.resize(2);
  for (int i = 0; i < 2; ++i) pair.aux_value(i) = auxiliary_closed_form(pair.r2(i), pair.order_weight(i), pair.aux_rate(i), 0.2);
  CHECK(auxiliary_monotonicity_check(pair, 0, 1, 0.0).holds());
  CHECK(auxiliary_monotonicity_check(pair, 1, 0, 0.0).holds());

  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int value_premises = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    AuxEvaluation grid;
    const int m = 2 + trial % 4;
    grid.params = make_aux_params(0.1, 0.3 * unit(rng), 1.0 + 3.0 * unit(rng), 1.0 + unit(rng), m);
    grid.aux_rate.resize(m);
    grid.r2.resize(m);
    grid.aux_value.resize(m);
    for (int i = 0; i < m; ++i) {
      grid.aux_rate(i) = std::pow(10.0, -4.0 * unit(rng));
      grid.r2(i) = unit(rng);
    }
    grid.order_weight = ordering_weights(grid.aux_rate, grid.params);
    for (int i = 0; i < m; ++i) {
      grid.aux_value(i) = auxiliary_closed_form(grid.r2(i), grid.order_weight(i), grid.aux_rate(i), grid.params.delta);
    }
    const double gamma = 0.2 * unit(rng);
    const AuxMonotonicityReport r = auxiliary_monotonicity_check(grid, 0, 1, gamma);
    value_premises += r.value_premise;
    CHECK(r.holds());
  }
  CHECK(value_premises > 1000);
}

}  // TEST_SUITE

}  // namespace
}  // namespace absorb_eq
