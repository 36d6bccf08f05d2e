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

#include "support/fixtures.hpp"

#include <string>

namespace absorb_eq::testing {

GameSpec game_g1(double r2) {
  GameSpec game;
  game.omega = 1.0;
  const StateId s0 = add_state(game, "s0", {"a"}, {"b1", "b2"});
  const StateId a1 = add_absorbing_state(game, "a1", 0.0, r2);
  set_transition(game, s0, 0, 0, a1, 1.0);
  set_transition(game, s0, 0, 1, s0, 1.0);
  return game;
}

GameSpec game_g2(double r_as, double r_at) {
  GameSpec game;
  game.omega = 0.0;
  const StateId s = add_state(game, "s", {"a"}, {"b"});
  const StateId t = add_state(game, "t", {"a"}, {"b"});
  const StateId as = add_absorbing_state(game, "A_s", 0.0, r_as);
  const StateId at = add_absorbing_state(game, "A_t", 0.0, r_at);
  set_transition(game, s, 0, 0, t, 0.5);
  set_transition(game, s, 0, 0, as, 0.5);
  set_transition(game, t, 0, 0, s, 0.5);
  set_transition(game, t, 0, 0, at, 0.5);
  return game;
}

Chain chain_g2() {
  const GameSpec game = game_g2();
  return induce_chain(game, uniform_profile(game));
}

GameSpec game_g2_choice() {
  GameSpec game;
  game.omega = 0.25;
  const StateId s = add_state(game, "s", {"a"}, {"walk", "stop"});
  const StateId t = add_state(game, "t", {"a"}, {"walk", "stop"});
  const StateId as = add_absorbing_state(game, "A_s", 0.25, 0.25);
  const StateId at = add_absorbing_state(game, "A_t", -0.25, 1.0);
  const StateId stop_s = add_absorbing_state(game, "S_s", 0.0, 0.5);
  const StateId stop_t = add_absorbing_state(game, "S_t", 0.5, 0.4);
  set_transition(game, s, 0, 0, t, 0.5);
  set_transition(game, s, 0, 0, as, 0.5);
  set_transition(game, s, 0, 1, stop_s, 1.0);
  set_transition(game, t, 0, 0, s, 0.5);
  set_transition(game, t, 0, 0, at, 0.5);
  set_transition(game, t, 0, 1, stop_t, 1.0);
  return game;
}

Eigen::VectorXd random_distribution(std::mt19937_64& rng, int size) {
  std::exponential_distribution<double> draw(1.0);
  Eigen::VectorXd d(size);
  for (int i = 0; i < size; ++i) d(i) = draw(rng);
  return d / d.sum();
}

Chain random_absorbing_chain(std::mt19937_64& rng, int n_transient, int n_absorbing, double density, double leak) {
  const int n = n_transient + n_absorbing;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n_transient; ++s) {
    Eigen::VectorXd inner = Eigen::VectorXd::Zero(n_transient);
    for (int t = 0; t < n_transient; ++t) {
      if (unit(rng) < density) inner(t) = unit(rng);
    }
    Eigen::VectorXd outer(n_absorbing);
    for (int t = 0; t < n_absorbing; ++t) outer(t) = unit(rng) < 0.5 ? unit(rng) : 0.0;
    if (outer.sum() == 0.0) outer(static_cast<int>(unit(rng) * n_absorbing) % n_absorbing) = 1.0;
    const double out_mass = leak + (1.0 - leak) * unit(rng) * 0.5;
    const double in_total = inner.sum();
    if (in_total > 0.0) {
      kernel.row(s).head(n_transient) = (1.0 - out_mass) * inner.transpose() / in_total;
      kernel.row(s).tail(n_absorbing) = out_mass * outer.transpose() / outer.sum();
    } else {
      kernel.row(s).tail(n_absorbing) = outer.transpose() / outer.sum();
    }
  }
  std::vector<bool> absorbing(n, false);
  for (int s = n_transient; s < n; ++s) {
    kernel(s, s) = 1.0;
    absorbing[s] = true;
  }
  return Chain(kernel, absorbing);
}

GameSpec random_game(std::mt19937_64& rng, int n_transient, int n_absorbing, int max_actions, double omega) {
  std::uniform_int_distribution<int> actions(1, max_actions);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GameSpec game;
  game.omega = omega;
  for (int s = 0; s < n_transient; ++s) {
    std::vector<std::string> p1, p2;
    const int k1 = actions(rng), k2 = actions(rng);
    for (int a = 0; a < k1; ++a) p1.push_back("a" + std::to_string(a));
    for (int b = 0; b < k2; ++b) p2.push_back("b" + std::to_string(b));
    add_state(game, "s" + std::to_string(s), p1, p2);
  }
  for (int t = 0; t < n_absorbing; ++t) {
    add_absorbing_state(game, "A" + std::to_string(t), unit(rng) - 0.5, omega + (1.0 - omega) * unit(rng));
  }
  const int n = game.num_states();
  for (int s = 0; s < n_transient; ++s) {
    StateSpec& st = game.states[s];
    for (Eigen::VectorXd& row : st.rows) {
      row = Eigen::VectorXd::Zero(n);
      for (int t = 0; t < n; ++t) {
        if (unit(rng) < 0.5) row(t) = unit(rng);
      }
      if (row.sum() == 0.0) row(n_transient) = 1.0;
      row /= row.sum();
    }
  }
  return game;
}

}  // namespace absorb_eq::testing
