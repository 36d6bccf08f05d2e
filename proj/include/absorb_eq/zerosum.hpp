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

// Zero-sum machinery: matrix games by linear programming, discounted
// punishment values of the stochastic game, their undiscounted limits on
// an alpha grid, and the jump functions built from them.

#ifndef ABSORB_EQ_ZEROSUM_HPP_
#define ABSORB_EQ_ZEROSUM_HPP_

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/game_model.hpp"

namespace absorb_eq {

enum class Maximizer { kRow, kColumn };

struct MatrixGameSolution {
  double value = 0.0;
  Eigen::VectorXd row_strategy;
  Eigen::VectorXd column_strategy;
  // Best-response upper value minus lower value of the returned strategies.
  double duality_gap = 0.0;
};

// Value and optimal mixed strategies of the matrix game with payoff
// x^T M y to the maximizer. Throws std::invalid_argument for an empty
// matrix.
MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& payoff, Maximizer maximizer = Maximizer::kRow);

enum class IterationMethod {
  kValueIteration,     // plain Shapley iteration
  kStrategyIteration,  // Hoffman-Karp: optimal maximizer, exact minimizer MDP
};

// Per-state value of the zero-sum game in which `player` maximizes its
// absorbing payoff and the other player minimizes it, every stage being
// discounted by 1 - alpha. Absorbing states are worth their payoff.
struct DiscountedSolution {
  int player = 2;
  double alpha = 0.0;
  Eigen::VectorXd values;
  // Stationary optimal strategies read off the final matrix games.
  std::vector<Eigen::VectorXd> p1_strategy;
  std::vector<Eigen::VectorXd> p2_strategy;
  double residual = 0.0;     // sup-norm of T(values) - values
  double error_bound = 0.0;  // residual / alpha bounds the distance to the fixed point
  int iterations = 0;
  std::vector<double> residual_history;  // per sweep, value iteration only
};

DiscountedSolution solve_discounted(const GameSpec& game, int player, double alpha, double tol,
                                    IterationMethod method = IterationMethod::kStrategyIteration,
                                    const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Undiscounted value approximated along alpha_k = 0.5 * 5^-k until two
// successive grid values differ by less than `epsilon / 4` in sup-norm.
struct UndiscountedValue {
  int player = 2;
  Eigen::VectorXd values;
  double alpha = 0.0;        // grid point whose values are returned
  double last_change = 0.0;  // sup-norm change from the previous grid point
  bool converged = false;
  std::vector<double> alphas;
};

UndiscountedValue undiscounted_value(const GameSpec& game, int player, double epsilon, double tol = 1e-12,
                                     int max_grid = 12);

struct ZeroSumTables {
  double alpha = 0.0;
  Eigen::VectorXd punish_discounted;  // Player Two's discounted punishment value
  std::vector<Eigen::VectorXd> punisher_strategy;  // Player One's optimal strategy in the discounted game
  Eigen::VectorXd c1, c2;   // undiscounted punishment values (empty unless requested)
  double tolerance = 0.0;   // error bound achieved on punish_discounted
};

ZeroSumTables discounted_values(const GameSpec& game, double alpha, double tol);
// Adds c1 and c2 at accuracy epsilon.
ZeroSumTables zero_sum_tables(const GameSpec& game, double alpha, double epsilon, double tol = 1e-12);

// The alpha grid 0.5 * 5^-k, k = 0..count-1.
std::vector<double> alpha_grid(int count);

struct JumpTables {
  double alpha = 0.0;
  Eigen::VectorXd jump_discounted;               // r2 on absorbing states
  std::vector<std::vector<int>> argmax;  // J^alpha_x(s), ties within 1e-9; empty at absorbing states
  Eigen::VectorXd j2;                    // undiscounted Player Two jump against x (needs c2)
  Eigen::VectorXd j1;                    // undiscounted Player One jump against y (needs c1 and y)
};

inline constexpr double kArgmaxTolerance = 1e-9;

JumpTables jump_function(const GameSpec& game, const std::vector<Eigen::VectorXd>& x, const ZeroSumTables& tables,
                         const std::optional<std::vector<Eigen::VectorXd>>& y = std::nullopt);

struct SubmartingaleReport {
  double max_violation = 0.0;  // max of j(s) - (1 - alpha) E j(n(s)) over s and b in J(s)
  int pairs = 0;
  bool holds = false;
};

SubmartingaleReport submartingale_check(const GameSpec& game, const std::vector<Eigen::VectorXd>& x,
                                        const ZeroSumTables& tables);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_ZEROSUM_HPP_
