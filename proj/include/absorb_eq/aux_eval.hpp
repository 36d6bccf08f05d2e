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

// The state-specific discounted evaluation of Player Two: auxiliary
// absorption rates, ordering weights and the evaluation aux_value of each move,
// in closed form, plus a path simulation of the defining expectation.

#ifndef ABSORB_EQ_AUX_EVAL_HPP_
#define ABSORB_EQ_AUX_EVAL_HPP_

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/chain_engine.hpp"
#include "absorb_eq/game_model.hpp"

namespace absorb_eq {

struct AuxParams {
  double epsilon_bar = 0.1;  // threshold on no-return probabilities
  double delta = 0.0;        // auxiliary discount
  double q1 = 2.0, q2 = 2.0;
  int num_states = 1;        // |N|, number of non-absorbing states
  double log_l() const;      // log(q1 q2)
  double log_k() const;      // |N| log(q1 q2); K itself overflows quickly
};

// Throws std::invalid_argument unless 0 < epsilon_bar < 1, delta >= 0 and
// q1, q2 > 1.
AuxParams make_aux_params(double epsilon_bar, double delta, double q1, double q2, int num_states);

struct MoveEvaluation {
  int move = 0;
  double frequency = 0.0;  // y^s_b
  double g = 0.0;          // no-return probability of the move
  double scaled_escape = 0.0;    // 1 above epsilon_bar, g / epsilon_bar below
  double escape_factor = 0.0;      // (1 - scaled_escape) = (1 - escape_factor)(1 - g)
  double v2 = 0.0;         // Player Two's value given the move and no return
  double scaled_value2 = 0.0;
  double aux_value = 0.0;
};

struct AuxEvaluation {
  AuxParams params;
  Eigen::VectorXd r2;       // Player Two's payoffs under the profile
  Eigen::VectorXd a;        // absorption rate, 1 at absorbing states
  Eigen::VectorXd aux_rate;  // auxiliary absorption rate, 1 at absorbing states
  Eigen::VectorXd order_weight;  // ordering weight, 1 at absorbing states
  Eigen::VectorXd aux_value;       // r2 at absorbing states
  Eigen::VectorXd aux_value_max;   // max over moves of aux_value^b
  std::vector<std::vector<MoveEvaluation>> moves;  // per state, one entry per Player Two move
  double identity_residual = 0.0;     // max |g v2 + (1 - g) escape_factor r2 - scaled_escape scaled_value2|
  double consistency_residual = 0.0;  // max |sum_b y_b aux_value^b - aux_value|
  double r2_residual = 0.0;           // max |r2 - aux_value (1 + delta (1 - a~) / (w~ a~))|
};

// g, g~, g-bar, v2 and v2~ for every move, and a~ for every state. Throws
// NonAbsorbingChainError when the profile is not absorbing.
AuxEvaluation aux_quantities(const GameSpec& game, const StrategyProfile& profile, const AuxParams& params);

// Weights from the ascending order of a~ (ties by position): the product of
// min(a~(s_{j+1}) / a~(s_j), K) over the states above. Entries of aux_rate
// are per non-absorbing state. Throws std::invalid_argument naming the
// position of a zero entry.
Eigen::VectorXd ordering_weights(const Eigen::VectorXd& aux_rate, const AuxParams& params);

// Everything above plus aux_value, aux_value^b and aux_value-bar.
AuxEvaluation auxiliary_values(const GameSpec& game, const StrategyProfile& profile, const AuxParams& params);

// aux_value(s) from r2, w~ a~ and a~.
double auxiliary_closed_form(double r2, double order_weight, double aux_rate, double delta);

struct SimulationTrace {
  struct Step {
    StateId state;
    int p1_move;
    int p2_move;
  };
  std::vector<Step> steps;
  std::vector<std::vector<int>> visit_stages;  // per state, stages of its visits
  bool absorbed = false;
  StateId final_state = 0;
  double payoff2 = 0.0;  // realized absorbing payoff, 0 when not absorbed
};

// One history from `start`; Player Two plays `first_move` at stage 0 when
// it is non-negative.
SimulationTrace simulate_trace(const GameSpec& game, const StrategyProfile& profile, StateId start, int first_move,
                               std::mt19937_64& rng, int horizon);

// Stage count after which the probability of not being absorbed is below
// `tail`, from the expected absorption time (Markov inequality).
int certified_horizon(const GameSpec& game, const StrategyProfile& profile, double tail);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double halfwidth = 0.0;  // 99% normal confidence half-width
  long runs = 0;
  long truncated = 0;      // histories cut at the horizon (counted as 0)
  int horizon = 0;
};

// Sample mean of the path expression defining aux_value^b (aux_value(s) when move < 0).
// Runs are split into chunks of 10^4, each with its own generator seeded
// by (seed, chunk index). horizon <= 0 picks certified_horizon(1e-4).
MonteCarloEstimate auxiliary_monte_carlo(const GameSpec& game, const StrategyProfile& profile, const AuxEvaluation& eval,
                                  StateId s, int move, long runs, std::uint64_t seed, int horizon = 0);

struct AuxMonotonicityReport {
  bool rate_premise = false;   // a~(t) <= K a~(s)
  bool rate_holds = true;      // then w~a~(t) <= w~a~(s)
  bool value_premise = false;  // w~a~(s) <= w~a~(t) and r2(s) <= r2(t) + gamma
  bool value_holds = true;     // then aux_value(s) <= aux_value(t) + gamma + delta
  bool holds() const { return rate_holds && value_holds; }
};

AuxMonotonicityReport auxiliary_monotonicity_check(const AuxEvaluation& eval, StateId s, StateId t, double gamma);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_AUX_EVAL_HPP_
