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

#ifndef ABSORB_EQ_TESTS_SUPPORT_FIXTURES_HPP_
#define ABSORB_EQ_TESTS_SUPPORT_FIXTURES_HPP_

#include <random>

#include <Eigen/Dense>

#include "absorb_eq/chain.hpp"
#include "absorb_eq/game_model.hpp"

namespace absorb_eq::testing {

// One non-absorbing state s0, Player One has one move, Player Two chooses
// between b1 (absorb in a1, payoffs (0, 1)) and b2 (stay).
GameSpec game_g1(double r2 = 1.0);

// s -> t or s -> A_s, t -> s or t -> A_t, each with probability 1/2, as a
// one-move game. State order: s, t, A_s, A_t.
GameSpec game_g2(double r_as = 0.0, double r_at = 1.0);
Chain chain_g2();

// G2 where Player Two chooses at each state between "stay on the walk"
// (the G2 row) and "absorb now". State order: s, t, A_s, A_t.
GameSpec game_g2_choice();

// Random chain with n_transient non-absorbing states followed by
// n_absorbing absorbing ones. Each transient row leaks at least `leak` to
// the absorbing states, so the chain is absorbing. Density controls the
// fraction of non-zero transient-to-transient entries.
Chain random_absorbing_chain(std::mt19937_64& rng, int n_transient, int n_absorbing, double density = 0.6,
                             double leak = 0.05);

// Random game with n_transient non-absorbing states, n_absorbing absorbing
// states, and up to max_actions moves per player.
GameSpec random_game(std::mt19937_64& rng, int n_transient, int n_absorbing, int max_actions, double omega = 0.1);

// Random point of the simplex of the given dimension.
Eigen::VectorXd random_distribution(std::mt19937_64& rng, int size);

}  // namespace absorb_eq::testing

#endif  // ABSORB_EQ_TESTS_SUPPORT_FIXTURES_HPP_
