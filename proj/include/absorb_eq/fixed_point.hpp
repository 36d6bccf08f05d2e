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

// Best replies of the two players under the auxiliary evaluation and a
// numerical search for profiles that are (approximately) their own best
// reply. Player One maximizes the next-stage undiscounted payoff, Player
// Two maximizes aux_value unless the discounted jump function dominates.

#ifndef ABSORB_EQ_FIXED_POINT_HPP_
#define ABSORB_EQ_FIXED_POINT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/aux_eval.hpp"
#include "absorb_eq/chain_engine.hpp"
#include "absorb_eq/game_model.hpp"
#include "absorb_eq/zerosum.hpp"

namespace absorb_eq {

enum class ReplyCase {
  kAbsorbingState,  // no choice to make
  kValueAboveJump,         // aux_value > j: argmax of aux_value^b
  kValueAtJump,         // |aux_value - j| within the band: jump set plus argmax of aux_value^b
  kValueBelowJump,         // aux_value < j: jump set
  kJumpOnly,        // profile not absorbing, aux_value undefined
};

const char* reply_case_name(ReplyCase c);

struct ReplyTolerances {
  double tie = 1e-9;   // argmax ties
  double band = 1e-7;  // equality band between aux_value and j
};

struct BestReplySets {
  std::vector<std::vector<int>> p1;  // per state, sorted
  std::vector<std::vector<int>> p2;
  std::vector<ReplyCase> cases;
  bool absorbing = true;
  StateSet trapped;                   // recurrent class when not absorbing
  Eigen::VectorXd r1;                 // Player One's payoff (0 on non-absorbing histories)
  Eigen::VectorXd jump_discounted;
  std::vector<std::vector<int>> jump;  // J^alpha_x per state
  std::vector<Eigen::VectorXd> w1;    // per state, next-stage payoff of each Player One move
  std::optional<AuxEvaluation> eval;  // present when absorbing
};

BestReplySets best_reply(const GameSpec& game, const StrategyProfile& profile, const ZeroSumTables& tables,
                         const AuxParams& params, const ReplyTolerances& tol = {});

// Largest mass, over players and non-absorbing states, that the profile
// puts outside the best-reply sets.
double reply_residual(const GameSpec& game, const StrategyProfile& profile, const BestReplySets& reply);

struct FixedPointSolver {
  double eta0 = 0.5;         // initial damping
  double eta_decay = 0.995;  // per-iteration factor
  double eta_min = 0.02;
  int max_iters = 2000;      // per restart
  int restarts = 16;         // restart 0 starts at the initial profile
  double tolerance = 1e-6;   // accept at residual <= tolerance
  ReplyTolerances reply;
  std::uint64_t seed = 0;
  bool grid_fallback = true;  // games with <= 2 non-absorbing states and <= 3 actions
  int grid_resolution = 64;
  long max_grid_points = 250000;  // resolution is halved until the grid fits
};

struct FixedPointCandidate {
  StrategyProfile profile;
  double residual = 1.0;
  bool converged = false;
  int iterations = 0;    // total best-reply evaluations in the damped phase
  int restart = -1;      // restart that produced the candidate, -1 for the grid
  double final_eta = 0.0;
  bool from_grid = false;
  int grid_resolution = 0;
  long grid_points = 0;
};

// Damped best-reply iteration x <- (1 - eta) x + eta uniform(B(x, y)) from
// the initial profile (uniform when absent) and from random restarts; at
// every step the profile restricted to its best-reply support is also
// tried. Falls back to an exhaustive grid for small games. Absorbing
// candidates rank first, then by residual, ties going to the earliest
// restart; only absorbing candidates are accepted.
FixedPointCandidate find_fixed_point(const GameSpec& game, const ZeroSumTables& tables, const AuxParams& params,
                                     const FixedPointSolver& solver = {},
                                     const std::optional<StrategyProfile>& initial = std::nullopt);

struct DiagnosticCheck {
  std::string name;
  bool evaluated = true;  // false when the check needs an absorbing profile
  bool vacuous = false;   // no state met the premise
  bool passed = true;
  double margin = 0.0;    // worst slack, negative on failure
  StateId witness = -1;   // state attaining the margin
  int witness_move = -1;
};

struct RegimeReport {
  double l = 0.0, l_star = 0.0;          // L = q1 q2 and 100 |N| / (omega^2 alpha^2 epsilon_bar)
  double delta = 0.0, delta_star = 0.0;  // epsilon_bar alpha^3 omega^3 / (300 |N|)
  double epsilon_bar = 0.0, epsilon_bar_max = 0.0;  // omega alpha / 4
  bool within_constants = false;
};

struct CandidateDiagnosis {
  RegimeReport regime;
  std::vector<DiagnosticCheck> checks;  // (a) through (f), in order
  double jump_mass = 0.0;               // max over states of the jump-only frequency
  bool ok() const;
};

// Checks at a candidate: (a) absorbing, (b) r2 >= j, (c) aux_value >= j,
// (d) low aux_value and low g where jump-only moves are used, (e) jump-only
// frequency at most omega alpha / 20 per state, (f) the two bounds on g^b
// at states with aux_value <= r2 - 2 epsilon_bar. A jump-only move is a used
// move of J^alpha_x outside argmax aux_value^b at a state in the equal or below
// case.
CandidateDiagnosis diagnose_candidate(const GameSpec& game, const StrategyProfile& profile,
                                      const ZeroSumTables& tables, const AuxParams& params,
                                      const ReplyTolerances& tol = {});

RegimeReport regime_report(const GameSpec& game, const ZeroSumTables& tables, const AuxParams& params);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_FIXED_POINT_HPP_
