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

#ifndef ABSORB_EQ_GAME_MODEL_HPP_
#define ABSORB_EQ_GAME_MODEL_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace absorb_eq {

class Chain;

using StateId = int;

inline constexpr double kStochasticTolerance = 1e-9;

// Thrown when a profile, boundary vector or index does not match the game.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One state of a two-player stochastic game. Absorbing states carry the
// terminal payoffs and a single action pair that self-loops.
struct StateSpec {
  std::string name;
  bool absorbing = false;
  double r1 = 0.0;
  double r2 = 0.0;
  std::vector<std::string> p1_actions;
  std::vector<std::string> p2_actions;
  // Next-state distribution for each action pair, indexed a * |A2| + b.
  std::vector<Eigen::VectorXd> rows;

  int num_p1() const { return static_cast<int>(p1_actions.size()); }
  int num_p2() const { return static_cast<int>(p2_actions.size()); }
  const Eigen::VectorXd& row(int a, int b) const { return rows.at(a * num_p2() + b); }
  Eigen::VectorXd& row(int a, int b) { return rows.at(a * num_p2() + b); }
};

// A two-player absorbing recursive stochastic game. Plain value type: the
// data may violate the model invariants, validate_game() reports them.
struct GameSpec {
  std::vector<StateSpec> states;
  double omega = 0.0;

  int num_states() const { return static_cast<int>(states.size()); }
  const StateSpec& state(StateId s) const { return states.at(s); }
  bool is_absorbing(StateId s) const { return states.at(s).absorbing; }
  std::vector<StateId> absorbing_states() const;
  std::vector<StateId> non_absorbing_states() const;
  StateId index_of(const std::string& name) const;  // throws std::out_of_range

  // Minimal strictly positive transition probability.
  double rho() const;
  // Maximal per-player action count over non-absorbing states.
  int max_actions() const;

  Eigen::VectorXd payoff1() const;  // r1 on absorbing states, 0 elsewhere
  Eigen::VectorXd payoff2() const;
  Eigen::VectorXd payoff(int player) const { return player == 1 ? payoff1() : payoff2(); }
};

// Adds an absorbing state with its self-loop. Returns its index. Rows of
// previously added states are extended with a zero entry.
StateId add_absorbing_state(GameSpec& game, std::string name, double r1, double r2);
// Adds a non-absorbing state whose rows are all zero; fill them with
// set_transition().
StateId add_state(GameSpec& game, std::string name, std::vector<std::string> p1_actions,
                  std::vector<std::string> p2_actions);
void set_transition(GameSpec& game, StateId s, int a, int b, StateId to, double p);

// Stationary mixed strategies, one distribution per player per state.
// Absorbing states carry the trivial distribution {1}.
struct StrategyProfile {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> y;
};

StrategyProfile uniform_profile(const GameSpec& game);
// Puts all mass on the given action indices (one per state; ignored at
// absorbing states).
StrategyProfile pure_profile(const GameSpec& game, const std::vector<int>& p1_choice,
                             const std::vector<int>& p2_choice);
// Throws DimensionError if sizes differ, std::invalid_argument if some
// distribution is not a probability vector within kStochasticTolerance.
void check_profile(const GameSpec& game, const StrategyProfile& profile);

struct ValidationIssue {
  std::string location;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> issues;
  // Whether Player Two has a stationary strategy under which every reaction
  // of Player One leads to absorption with positive probability from every
  // state (hence with probability one).
  bool is_absorbing_forcible_p2 = false;
};

ValidationReport validate_game(const GameSpec& game);

// Renormalizes every row whose sum is within kStochasticTolerance of one.
// Rows outside the tolerance are left alone (validate_game reports them).
void normalize_rows(GameSpec& game);

// The time-homogeneous chain of a stationary profile, with one part per
// action pair (a, b) of weight x_a * y_b.
Chain induce_chain(const GameSpec& game, const StrategyProfile& profile);

// Next-state distribution when Player One mixes with x^s and Player Two
// plays b (or symmetrically).
Eigen::VectorXd mixed_row_p2_move(const GameSpec& game, StateId s, const Eigen::VectorXd& x_s, int b);
Eigen::VectorXd mixed_row_p1_move(const GameSpec& game, StateId s, int a, const Eigen::VectorXd& y_s);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_GAME_MODEL_HPP_
