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

#include "absorb_eq/game_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "absorb_eq/chain.hpp"

namespace absorb_eq {

std::vector<StateId> GameSpec::absorbing_states() const {
  std::vector<StateId> out;
  for (int s = 0; s < num_states(); ++s) {
    if (states[s].absorbing) out.push_back(s);
  }
  return out;
}

std::vector<StateId> GameSpec::non_absorbing_states() const {
  std::vector<StateId> out;
  for (int s = 0; s < num_states(); ++s) {
    if (!states[s].absorbing) out.push_back(s);
  }
  return out;
}

StateId GameSpec::index_of(const std::string& name) const {
  for (int s = 0; s < num_states(); ++s) {
    if (states[s].name == name) return s;
  }
  throw std::out_of_range("unknown state '" + name + "'");
}

double GameSpec::rho() const {
  double best = std::numeric_limits<double>::infinity();
  for (const StateSpec& st : states) {
    for (const Eigen::VectorXd& row : st.rows) {
      for (Eigen::Index t = 0; t < row.size(); ++t) {
        if (row(t) > 0.0) best = std::min(best, row(t));
      }
    }
  }
  return best;
}

int GameSpec::max_actions() const {
  int m = 0;
  for (const StateSpec& st : states) {
    if (st.absorbing) continue;
    m = std::max({m, st.num_p1(), st.num_p2()});
  }
  return m;
}

Eigen::VectorXd GameSpec::payoff1() const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(num_states());
  for (int s = 0; s < num_states(); ++s) {
    if (states[s].absorbing) r(s) = states[s].r1;
  }
  return r;
}

Eigen::VectorXd GameSpec::payoff2() const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(num_states());
  for (int s = 0; s < num_states(); ++s) {
    if (states[s].absorbing) r(s) = states[s].r2;
  }
  return r;
}

namespace {

void grow_rows(GameSpec& game) {
  const int n = game.num_states();
  for (StateSpec& st : game.states) {
    for (Eigen::VectorXd& row : st.rows) {
      const Eigen::Index old = row.size();
      if (old < n) {
        row.conservativeResize(n);
        row.tail(n - old).setZero();
      }
    }
  }
}

}  // namespace

StateId add_absorbing_state(GameSpec& game, std::string name, double r1, double r2) {
  StateSpec st;
  st.name = std::move(name);
  st.absorbing = true;
  st.r1 = r1;
  st.r2 = r2;
  st.p1_actions = {"-"};
  st.p2_actions = {"-"};
  st.rows.push_back(Eigen::VectorXd::Zero(0));
  game.states.push_back(std::move(st));
  grow_rows(game);
  const StateId s = game.num_states() - 1;
  game.states[s].rows[0](s) = 1.0;
  return s;
}

StateId add_state(GameSpec& game, std::string name, std::vector<std::string> p1_actions,
                  std::vector<std::string> p2_actions) {
  StateSpec st;
  st.name = std::move(name);
  st.p1_actions = std::move(p1_actions);
  st.p2_actions = std::move(p2_actions);
  st.rows.assign(st.p1_actions.size() * st.p2_actions.size(), Eigen::VectorXd::Zero(0));
  game.states.push_back(std::move(st));
  grow_rows(game);
  return game.num_states() - 1;
}

void set_transition(GameSpec& game, StateId s, int a, int b, StateId to, double p) {
  game.states.at(s).row(a, b)(to) = p;
}

StrategyProfile uniform_profile(const GameSpec& game) {
  StrategyProfile profile;
  for (const StateSpec& st : game.states) {
    profile.x.push_back(Eigen::VectorXd::Constant(st.num_p1(), 1.0 / st.num_p1()));
    profile.y.push_back(Eigen::VectorXd::Constant(st.num_p2(), 1.0 / st.num_p2()));
  }
  return profile;
}

StrategyProfile pure_profile(const GameSpec& game, const std::vector<int>& p1_choice,
                             const std::vector<int>& p2_choice) {
  if (static_cast<int>(p1_choice.size()) != game.num_states() ||
      static_cast<int>(p2_choice.size()) != game.num_states()) {
    throw DimensionError("pure profile needs one choice per state");
  }
  StrategyProfile profile;
  for (int s = 0; s < game.num_states(); ++s) {
    const StateSpec& st = game.states[s];
    Eigen::VectorXd x = Eigen::VectorXd::Zero(st.num_p1());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(st.num_p2());
    x(st.absorbing ? 0 : p1_choice[s]) = 1.0;
    y(st.absorbing ? 0 : p2_choice[s]) = 1.0;
    profile.x.push_back(std::move(x));
    profile.y.push_back(std::move(y));
  }
  return profile;
}

namespace {

void check_distribution(const Eigen::VectorXd& d, const std::string& where) {
  if ((d.array() < -kStochasticTolerance).any() || (d.array() > 1.0 + kStochasticTolerance).any()) {
    throw std::invalid_argument("strategy entry outside [0,1] at " + where);
  }
  if (std::abs(d.sum() - 1.0) > kStochasticTolerance) {
    throw std::invalid_argument("strategy does not sum to one at " + where);
  }
}

}  // namespace

void check_profile(const GameSpec& game, const StrategyProfile& profile) {
  const int n = game.num_states();
  if (static_cast<int>(profile.x.size()) != n || static_cast<int>(profile.y.size()) != n) {
    throw DimensionError("profile has wrong number of states");
  }
  for (int s = 0; s < n; ++s) {
    const StateSpec& st = game.states[s];
    if (profile.x[s].size() != st.num_p1() || profile.y[s].size() != st.num_p2()) {
      throw DimensionError("profile action count mismatch at " + st.name);
    }
    check_distribution(profile.x[s], st.name + " (player 1)");
    check_distribution(profile.y[s], st.name + " (player 2)");
  }
}

void normalize_rows(GameSpec& game) {
  for (StateSpec& st : game.states) {
    for (Eigen::VectorXd& row : st.rows) {
      const double total = row.sum();
      if (total > 0.0 && std::abs(total - 1.0) <= kStochasticTolerance) row /= total;
    }
  }
}

ValidationReport validate_game(const GameSpec& game) {
  ValidationReport report;
  auto issue = [&report](std::string where, std::string what) {
    report.issues.push_back({std::move(where), std::move(what)});
  };
  const int n = game.num_states();
  if (!(game.omega > 0.0)) issue("omega", "omega must be positive");
  if (n == 0) issue("states", "game has no states");
  if (game.absorbing_states().empty() && n > 0) issue("states", "game has no absorbing state");

  bool shape_ok = true;
  for (int s = 0; s < n; ++s) {
    const StateSpec& st = game.states[s];
    const std::string where = "state " + st.name;
    if (st.absorbing) {
      if (st.num_p1() != 1 || st.num_p2() != 1) issue(where, "absorbing state must have exactly one action pair");
      if (st.r2 < game.omega) issue(where, "payoff2 below omega");
      if (st.r2 > 1.0) issue(where, "payoff2 above 1");
      if (st.r1 < -0.5 || st.r1 > 0.5) issue(where, "payoff1 outside [-1/2, 1/2]");
    } else {
      if (st.num_p1() == 0 || st.num_p2() == 0) issue(where, "empty action set");
    }
    if (static_cast<int>(st.rows.size()) != st.num_p1() * st.num_p2()) {
      issue(where, "wrong number of transition rows");
      shape_ok = false;
      continue;
    }
    for (int a = 0; a < st.num_p1(); ++a) {
      for (int b = 0; b < st.num_p2(); ++b) {
        const Eigen::VectorXd& row = st.row(a, b);
        std::ostringstream loc;
        loc << where << " actions (" << st.p1_actions[a] << "," << st.p2_actions[b] << ")";
        if (row.size() != n) {
          issue(loc.str(), "transition row has wrong length");
          shape_ok = false;
          continue;
        }
        if ((row.array() < 0.0).any()) issue(loc.str(), "negative probability");
        if (std::abs(row.sum() - 1.0) > kStochasticTolerance) issue(loc.str(), "row not stochastic");
        if (st.absorbing && std::abs(row(s) - 1.0) > kStochasticTolerance) {
          issue(loc.str(), "absorbing state does not self-loop");
        }
      }
    }
  }

  if (shape_ok && n > 0) {
    // Attractor of the absorbing set: states where, whatever Player One
    // does, some Player Two action moves into the attractor with positive
    // probability.
    std::vector<bool> win(n, false);
    for (int s = 0; s < n; ++s) win[s] = game.states[s].absorbing;
    bool changed = true;
    while (changed) {
      changed = false;
      for (int s = 0; s < n; ++s) {
        if (win[s]) continue;
        const StateSpec& st = game.states[s];
        bool all_a = st.num_p1() > 0;
        for (int a = 0; a < st.num_p1() && all_a; ++a) {
          bool some = false;
          for (int b = 0; b < st.num_p2() && !some; ++b) {
            for (int t = 0; t < n && !some; ++t) some = win[t] && st.row(a, b)(t) > 0.0;
          }
          all_a = some;
        }
        if (all_a) {
          win[s] = true;
          changed = true;
        }
      }
    }
    report.is_absorbing_forcible_p2 = std::all_of(win.begin(), win.end(), [](bool w) { return w; });
  }
  report.ok = report.issues.empty();
  return report;
}

Eigen::VectorXd mixed_row_p2_move(const GameSpec& game, StateId s, const Eigen::VectorXd& x_s, int b) {
  const StateSpec& st = game.state(s);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(game.num_states());
  for (int a = 0; a < st.num_p1(); ++a) row += x_s(a) * st.row(a, b);
  return row;
}

Eigen::VectorXd mixed_row_p1_move(const GameSpec& game, StateId s, int a, const Eigen::VectorXd& y_s) {
  const StateSpec& st = game.state(s);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(game.num_states());
  for (int b = 0; b < st.num_p2(); ++b) row += y_s(b) * st.row(a, b);
  return row;
}

Chain induce_chain(const GameSpec& game, const StrategyProfile& profile) {
  check_profile(game, profile);
  const int n = game.num_states();
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
  std::vector<bool> absorbing(n);
  std::vector<std::string> names(n);
  std::vector<std::vector<Part>> parts(n);
  for (int s = 0; s < n; ++s) {
    const StateSpec& st = game.states[s];
    absorbing[s] = st.absorbing;
    names[s] = st.name;
    for (int a = 0; a < st.num_p1(); ++a) {
      for (int b = 0; b < st.num_p2(); ++b) {
        const double w = profile.x[s](a) * profile.y[s](b);
        kernel.row(s) += w * st.row(a, b).transpose();
        Part part;
        part.host = s;
        part.frequency = w;
        part.row = st.row(a, b);
        part.p1_action = a;
        part.p2_action = b;
        part.label = st.p1_actions[a] + "," + st.p2_actions[b];
        parts[s].push_back(std::move(part));
      }
    }
  }
  return Chain(std::move(kernel), std::move(absorbing), std::move(names), std::move(parts));
}

}  // namespace absorb_eq
