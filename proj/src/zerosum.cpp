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

#include "absorb_eq/zerosum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace absorb_eq {

namespace {

constexpr double kPivotTolerance = 1e-12;

// Maximizes sum(w) subject to A w <= 1, w >= 0 for a positive matrix A.
// Returns the primal w and the dual u (prices of the rows). Bland's rule
// keeps degenerate pivots from cycling.
void solve_positive_lp(const Eigen::MatrixXd& a, Eigen::VectorXd& w, Eigen::VectorXd& u) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  const int width = n + m + 1;
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, width);
  tab.topLeftCorner(m, n) = a;
  tab.block(0, n, m, m).setIdentity();
  tab.col(width - 1).head(m).setOnes();
  tab.row(m).head(n).setConstant(-1.0);
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  while (true) {
    int enter = -1;
    for (int j = 0; j < n + m; ++j) {
      if (tab(m, j) < -kPivotTolerance) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (tab(i, enter) <= kPivotTolerance) continue;
      const double ratio = tab(i, width - 1) / tab(i, enter);
      if (ratio < best - kPivotTolerance || (std::abs(ratio - best) <= kPivotTolerance && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave < 0) throw std::logic_error("matrix game LP is unbounded");
    tab.row(leave) /= tab(leave, enter);
    for (int i = 0; i <= m; ++i) {
      if (i != leave && tab(i, enter) != 0.0) tab.row(i) -= tab(i, enter) * tab.row(leave);
    }
    basis[leave] = enter;
  }
  w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) w(basis[i]) = tab(i, width - 1);
  }
  u = tab.row(m).segment(n, m).transpose();
}

Eigen::VectorXd to_distribution(Eigen::VectorXd v) {
  v = v.cwiseMax(0.0);
  return v / v.sum();
}

}  // namespace

MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& payoff, Maximizer maximizer) {
  if (payoff.rows() == 0 || payoff.cols() == 0) throw std::invalid_argument("empty payoff matrix");
  if (maximizer == Maximizer::kColumn) {
    // The column player maximizing x^T M y is the row player of M^T.
    MatrixGameSolution t = solve_matrix_game(payoff.transpose(), Maximizer::kRow);
    std::swap(t.row_strategy, t.column_strategy);
    return t;
  }
  const double shift = 1.0 - payoff.minCoeff();
  Eigen::VectorXd w, u;
  solve_positive_lp(payoff.array() + shift, w, u);
  MatrixGameSolution out;
  out.row_strategy = to_distribution(u);
  out.column_strategy = to_distribution(w);
  const double lower = (out.row_strategy.transpose() * payoff).minCoeff();
  const double upper = (payoff * out.column_strategy).maxCoeff();
  out.duality_gap = upper - lower;
  out.value = out.row_strategy.dot(payoff * out.column_strategy);
  return out;
}

namespace {

// Matrix of discounted continuation values at s, rows Player One moves.
Eigen::MatrixXd stage_matrix(const GameSpec& game, StateId s, const Eigen::VectorXd& c, double alpha) {
  const StateSpec& st = game.state(s);
  Eigen::MatrixXd m(st.num_p1(), st.num_p2());
  for (int a = 0; a < st.num_p1(); ++a) {
    for (int b = 0; b < st.num_p2(); ++b) m(a, b) = (1.0 - alpha) * st.row(a, b).dot(c);
  }
  return m;
}

struct ShapleyStep {
  Eigen::VectorXd values;
  std::vector<Eigen::VectorXd> p1, p2;
};

ShapleyStep shapley_operator(const GameSpec& game, int player, const Eigen::VectorXd& c, double alpha,
                             const Eigen::VectorXd& payoff) {
  const int n = game.num_states();
  ShapleyStep out;
  out.values = c;
  out.p1.resize(n);
  out.p2.resize(n);
  for (int s = 0; s < n; ++s) {
    if (game.is_absorbing(s)) {
      out.values(s) = payoff(s);
      out.p1[s] = out.p2[s] = Eigen::VectorXd::Ones(1);
      continue;
    }
    const MatrixGameSolution sol =
        solve_matrix_game(stage_matrix(game, s, c, alpha), player == 1 ? Maximizer::kRow : Maximizer::kColumn);
    out.values(s) = sol.value;
    out.p1[s] = sol.row_strategy;
    out.p2[s] = sol.column_strategy;
  }
  return out;
}

// Exact discounted value of the minimizer's best reply to a fixed
// maximizer strategy, by policy iteration.
Eigen::VectorXd best_reply_values(const GameSpec& game, int player, const std::vector<Eigen::VectorXd>& fixed,
                                  double alpha, const Eigen::VectorXd& payoff, Eigen::VectorXd c) {
  const int n = game.num_states();
  const std::vector<StateId> live = game.non_absorbing_states();
  // Rows available to the minimizer at s: one per own move, mixed over the
  // maximizer's fixed strategy.
  std::vector<std::vector<Eigen::VectorXd>> options(n);
  for (StateId s : live) {
    const StateSpec& st = game.state(s);
    const int own = player == 2 ? st.num_p1() : st.num_p2();
    for (int m = 0; m < own; ++m) {
      options[s].push_back(player == 2 ? mixed_row_p1_move(game, s, m, fixed[s]) : mixed_row_p2_move(game, s, fixed[s], m));
    }
  }
  std::vector<int> policy(n, 0);
  auto improve = [&](const Eigen::VectorXd& values, bool keep_ties) {
    bool changed = false;
    for (StateId s : live) {
      int best = policy[s];
      double best_value = options[s][best].dot(values);
      for (int m = 0; m < static_cast<int>(options[s].size()); ++m) {
        const double v = options[s][m].dot(values);
        if (v < best_value - (keep_ties ? 1e-13 : 0.0)) {
          best = m;
          best_value = v;
        }
      }
      changed = changed || best != policy[s];
      policy[s] = best;
    }
    return changed;
  };
  improve(c, false);
  const int k = static_cast<int>(live.size());
  for (int round = 0; round < 1000; ++round) {
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd& row = options[live[i]][policy[live[i]]];
      for (int j = 0; j < k; ++j) lhs(i, j) -= (1.0 - alpha) * row(live[j]);
      for (StateId a : game.absorbing_states()) rhs(i) += (1.0 - alpha) * row(a) * payoff(a);
    }
    const Eigen::VectorXd sol = lhs.partialPivLu().solve(rhs);
    for (int i = 0; i < k; ++i) c(live[i]) = sol(i);
    for (StateId a : game.absorbing_states()) c(a) = payoff(a);
    if (!improve(c, true)) break;
  }
  return c;
}

}  // namespace

DiscountedSolution solve_discounted(const GameSpec& game, int player, double alpha, double tol, IterationMethod method,
                                    const std::optional<Eigen::VectorXd>& start) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (player != 1 && player != 2) throw std::invalid_argument("player must be 1 or 2");
  const Eigen::VectorXd payoff = game.payoff(player);
  DiscountedSolution out;
  out.player = player;
  out.alpha = alpha;
  Eigen::VectorXd c = start ? *start : payoff;
  if (c.size() != game.num_states()) throw DimensionError("start vector has wrong length");
  for (StateId a : game.absorbing_states()) c(a) = payoff(a);

  ShapleyStep step = shapley_operator(game, player, c, alpha, payoff);
  double residual = (step.values - c).cwiseAbs().maxCoeff();
  if (method == IterationMethod::kValueIteration) {
    const long cap = 20'000'000 / std::max(1, game.num_states());
    while (residual / alpha > tol && out.iterations < cap) {
      c = step.values;
      step = shapley_operator(game, player, c, alpha, payoff);
      residual = (step.values - c).cwiseAbs().maxCoeff();
      out.residual_history.push_back(residual);
      ++out.iterations;
    }
  } else {
    const double floor = std::max(tol * alpha, 1e-14);
    while (residual > floor && out.iterations < 200) {
      const std::vector<Eigen::VectorXd>& fixed = player == 2 ? step.p2 : step.p1;
      const Eigen::VectorXd next = best_reply_values(game, player, fixed, alpha, payoff, c);
      const ShapleyStep next_step = shapley_operator(game, player, next, alpha, payoff);
      const double next_residual = (next_step.values - next).cwiseAbs().maxCoeff();
      ++out.iterations;
      const bool stalled = (next - c).cwiseAbs().maxCoeff() <= 1e-15;
      c = next;
      step = next_step;
      residual = next_residual;
      if (stalled) break;
    }
  }
  out.values = c;
  out.p1_strategy = step.p1;
  out.p2_strategy = step.p2;
  out.residual = residual;
  out.error_bound = residual / alpha;
  return out;
}

std::vector<double> alpha_grid(int count) {
  std::vector<double> grid;
  double alpha = 0.5;
  for (int k = 0; k < count; ++k, alpha /= 5.0) grid.push_back(alpha);
  return grid;
}

UndiscountedValue undiscounted_value(const GameSpec& game, int player, double epsilon, double tol, int max_grid) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  UndiscountedValue out;
  out.player = player;
  std::optional<Eigen::VectorXd> previous;
  for (double alpha : alpha_grid(max_grid)) {
    const DiscountedSolution sol = solve_discounted(game, player, alpha, tol, IterationMethod::kStrategyIteration, previous);
    out.alphas.push_back(alpha);
    out.alpha = alpha;
    out.values = sol.values;
    if (previous) {
      out.last_change = (sol.values - *previous).cwiseAbs().maxCoeff();
      if (out.last_change < epsilon / 4.0) {
        out.converged = true;
        break;
      }
    }
    previous = sol.values;
  }
  return out;
}

ZeroSumTables discounted_values(const GameSpec& game, double alpha, double tol) {
  const DiscountedSolution sol = solve_discounted(game, 2, alpha, tol);
  ZeroSumTables tables;
  tables.alpha = alpha;
  tables.punish_discounted = sol.values;
  tables.punisher_strategy = sol.p1_strategy;
  tables.tolerance = sol.error_bound;
  return tables;
}

ZeroSumTables zero_sum_tables(const GameSpec& game, double alpha, double epsilon, double tol) {
  ZeroSumTables tables = discounted_values(game, alpha, tol);
  tables.c1 = undiscounted_value(game, 1, epsilon, tol).values;
  tables.c2 = undiscounted_value(game, 2, epsilon, tol).values;
  return tables;
}

JumpTables jump_function(const GameSpec& game, const std::vector<Eigen::VectorXd>& x, const ZeroSumTables& tables,
                         const std::optional<std::vector<Eigen::VectorXd>>& y) {
  const int n = game.num_states();
  if (static_cast<int>(x.size()) != n || tables.punish_discounted.size() != n) throw DimensionError("jump function inputs have wrong size");
  if (y && static_cast<int>(y->size()) != n) throw DimensionError("Player Two strategy has wrong size");
  JumpTables out;
  out.alpha = tables.alpha;
  out.jump_discounted = game.payoff2();
  out.argmax.resize(n);
  const bool with_j2 = tables.c2.size() == n;
  const bool with_j1 = tables.c1.size() == n && y.has_value();
  if (with_j2) out.j2 = game.payoff2();
  if (with_j1) out.j1 = game.payoff1();
  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    Eigen::VectorXd next(st.num_p2());
    double best2 = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < st.num_p2(); ++b) {
      const Eigen::VectorXd row = mixed_row_p2_move(game, s, x[s], b);
      next(b) = row.dot(tables.punish_discounted);
      if (with_j2) best2 = std::max(best2, row.dot(tables.c2));
    }
    const double best = next.maxCoeff();
    out.jump_discounted(s) = (1.0 - tables.alpha) * best;
    for (int b = 0; b < st.num_p2(); ++b) {
      if (next(b) >= best - kArgmaxTolerance) out.argmax[s].push_back(b);
    }
    if (with_j2) out.j2(s) = best2;
    if (with_j1) {
      double best1 = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < st.num_p1(); ++a) best1 = std::max(best1, mixed_row_p1_move(game, s, a, (*y)[s]).dot(tables.c1));
      out.j1(s) = best1;
    }
  }
  return out;
}

SubmartingaleReport submartingale_check(const GameSpec& game, const std::vector<Eigen::VectorXd>& x,
                                        const ZeroSumTables& tables) {
  const JumpTables jump = jump_function(game, x, tables);
  SubmartingaleReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (StateId s : game.non_absorbing_states()) {
    for (int b : jump.argmax[s]) {
      const double next = (1.0 - tables.alpha) * mixed_row_p2_move(game, s, x[s], b).dot(jump.jump_discounted);
      report.max_violation = std::max(report.max_violation, jump.jump_discounted(s) - next);
      ++report.pairs;
    }
  }
  if (report.pairs == 0) report.max_violation = 0.0;
  report.holds = report.max_violation <= 1e-9;
  return report;
}

}  // namespace absorb_eq
