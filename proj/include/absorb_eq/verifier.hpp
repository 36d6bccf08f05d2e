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

// Certification of stationary profiles as approximate equilibria: exact
// best responses against a frozen opponent, the certificate conditions,
// the test-and-punish strategy (simulated, and evaluated against an
// optimal deviator on an augmented state), and empirical checks of the
// martingale bounds behind it.

#ifndef ABSORB_EQ_VERIFIER_HPP_
#define ABSORB_EQ_VERIFIER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/chain.hpp"
#include "absorb_eq/game_model.hpp"
#include "absorb_eq/zerosum.hpp"

namespace absorb_eq {

// ---------------------------------------------------------------------------
// Best response against a stationary opponent.

enum class DeviationMode { kUndiscounted, kDiscounted };

inline constexpr int kNeverAbsorb = -2;  // policy entry: stay among non-absorbing states forever

struct BestResponse {
  int player = 1;
  DeviationMode mode = DeviationMode::kUndiscounted;
  double alpha = 0.0;
  Eigen::VectorXd values;
  std::vector<int> policy;      // optimal move per state, 0 at absorbing states
  bool never_absorbs = false;   // some state is optimal only by avoiding absorption (value 0)
  double bellman_residual = 0.0;
  int improvements = 0;         // policy-iteration rounds
};

// Optimal value of `player` when the other player keeps playing its part
// of `profile`. Histories that never absorb pay 0; every stage is
// discounted by 1 - alpha in discounted mode.
BestResponse best_response_value(const GameSpec& game, const StrategyProfile& profile, int player,
                                 DeviationMode mode = DeviationMode::kUndiscounted, double alpha = 0.0);

// Smallest n with P(play not absorbed at stage n) < tail from `start`.
// Throws std::runtime_error past max_stages.
int absorption_horizon(const GameSpec& game, const StrategyProfile& profile, StateId start, double tail,
                       int max_stages = 1000000);

// ---------------------------------------------------------------------------
// Certificate.

struct CertificateMargin {
  int player = 0;
  StateId state = 0;
  int move = -1;        // -1 for per-state conditions
  double value = 0.0;   // the quantity tested
  double margin = 0.0;  // slack, negative on failure
};

struct Certificate {
  double epsilon = 0.0;
  double m = 1.0;              // bound on payoff differences
  int n = 0;                   // evaluation-space size
  double delta_used = 0.0;     // max |w^k(c) - r^k(s)| over used moves
  double delta_budget = 0.0;   // epsilon^3 / (n m)
  Eigen::VectorXd r1, r2, j1, j2;
  std::vector<CertificateMargin> payoff_margins;  // r^k(s) - (j^k(s) - epsilon)
  std::vector<CertificateMargin> move_margins;    // delta_budget - |w^k(c) - r^k(s)|
  std::vector<CertificateMargin> witnesses;       // every negative margin
  bool epsilon_in_range = true;                   // 0 < epsilon < 1/2
  bool certified = false;
};

// Needs tables.c1 and tables.c2 (zero_sum_tables). n = 0 uses the number
// of states. Throws NonAbsorbingChainError for a non-absorbing profile.
Certificate certify_profile(const GameSpec& game, const StrategyProfile& profile, double epsilon,
                              const ZeroSumTables& tables, int n = 0);

// Same conditions on a game over situations: situation u lives at the
// original state base[u], the punishment values are those of the original
// game, and n is the number of situations.
Certificate certify_situations(const GameSpec& situations, const std::vector<StateId>& base,
                              const StrategyProfile& profile, double epsilon, const ZeroSumTables& original_tables);

// ---------------------------------------------------------------------------
// Test-and-punish.

struct RunRecord {
  bool absorbed = false;
  bool punished = false;
  bool horizon_expired = false;
  int first_violation_stage = -1;
  int trigger_player = 0;     // 1 or 2 when punished
  int stages = 0;
  double max_statistic1 = 0.0;
  double max_statistic2 = 0.0;
};

struct SimulationReport {
  StateId start = 0;
  long runs = 0;
  int horizon = 0;              // n_{s0}
  double epsilon = 0.0;
  double punishment_frequency = 0.0;
  double punishment_low = 0.0, punishment_high = 0.0;  // 99% Wilson interval
  double never_violated_frequency = 0.0;
  double horizon_expiry_frequency = 0.0;
  double absorption_frequency = 0.0;
  double mean_absorption_stage = 0.0;  // over absorbed runs
  double mean_max_statistic = 0.0;     // mean over runs of the larger of the two maxima
  std::vector<RunRecord> records;      // kept when requested
};

// Both players follow the profile while each player's statistic
// sum (w^k(c_i) - r^k(s_i)) stays at most epsilon and the stage is at most
// the horizon (absorption before it with probability 1 - epsilon/10).
SimulationReport simulate_test_and_punish(const GameSpec& game, const StrategyProfile& profile, double epsilon,
                                          StateId start, long runs, std::uint64_t seed, bool keep_records = false);

struct DeviationGap {
  int player = 1;
  StateId start = 0;
  int horizon = 0;
  double bucket_width = 0.0;
  int buckets = 0;
  double value = 0.0;         // optimal deviation value against test-and-punish
  double payoff = 0.0;        // r^k(start)
  double gap = 0.0;           // value - payoff
  double stationary_gap = 0.0;  // against the stationary opponent
};

struct GapReport {
  double epsilon = 0.0;
  std::vector<DeviationGap> gaps;
  double max_gap = 0.0;
  double opponent_increment = 0.0;  // max |w - r| over used moves of the follower
  bool opponent_rounds_to_zero = true;  // follower's statistic stays in bucket 0
};

// Optimal deviation of each player against the other's test-and-punish
// strategy by backward induction on (state, statistic bucket, stage).
// Statistic increments are rounded to the nearest multiple of epsilon/20;
// leaving the support, exceeding epsilon or passing the horizon switches
// the follower to punishment, worth c_k + epsilon to the deviator. Throws
// std::length_error when the program exceeds max_cells.
GapReport test_and_punish_gap(const GameSpec& game, const StrategyProfile& profile, double epsilon,
                              const ZeroSumTables& tables, const std::vector<StateId>& starts = {},
                              long max_cells = 50000000);

// ---------------------------------------------------------------------------
// Martingale bounds.

// Chain alternating between positions X and moves Y_x.
struct TwoLayerChain {
  std::vector<bool> absorbing;                       // per position
  Eigen::VectorXd terminal;                          // value at absorbing positions
  std::vector<Eigen::VectorXd> move_prob;            // p^x over Y_x
  std::vector<std::vector<Eigen::VectorXd>> move_row;  // p^y over X
  int size() const { return static_cast<int>(absorbing.size()); }
};

// Positions are the states; the moves are the moves of `player` against
// the other player's mixed action; values are the player's payoffs.
TwoLayerChain two_layer_from_profile(const GameSpec& game, const StrategyProfile& profile, int player);

// Walk on positions 0..n with values 0 and 1 at the ends. Each position has
// moves "left" and "right", chosen with probability 1/2; a move goes one
// step with probability `step` and stays otherwise.
TwoLayerChain random_walk_chain(int n, double step = 1.0);

// Harmonic values on the positions, then v(y) for every move.
Eigen::VectorXd two_layer_values(const TwoLayerChain& chain);

struct PartialSumReport {
  int n = 0;                  // |X|
  double m = 0.0;             // max - min of v
  double epsilon = 0.0;
  double delta = 0.0;
  double budget = 0.0;        // epsilon^3 / (m n)
  double max_edge = 0.0;      // max |v(y) - v(x)| over used moves
  StateId witness_x = -1;
  int witness_y = -1;
  bool edges_within_delta = true;  // otherwise nothing is simulated
  bool admissible = false;         // edges within delta, delta <= budget, epsilon < 1/2
  long runs = 0;
  long truncated = 0;
  double probability = 0.0;        // estimate of P(some partial sum >= epsilon)
  double low = 0.0, high = 0.0;    // 99% Wilson interval
  bool holds = false;              // high <= epsilon
};

// Runs stop at absorption, when the partial sum first reaches epsilon, or
// after max_steps moves (truncated).
PartialSumReport partial_sum_check(const TwoLayerChain& chain, StateId start, double delta, double epsilon, long runs,
                                std::uint64_t seed, long max_steps = 10000000);

struct VariationSumReport {
  StateId start = 0;
  int n = 0;            // states with w(x) > 0
  double m = 0.0;       // max - min of v
  double bound = 0.0;   // m n
  double exact = 0.0;   // expected w-sum from the visit matrix
  double estimate = 0.0;
  double stddev = 0.0;  // per-run standard deviation
  long runs = 0;
  bool holds = false;   // exact <= bound and estimate - 3 stddev / sqrt(runs) <= bound
};

// w(x) = sum_y p(x,y) |v(y) - v(x)| for the harmonic extension v of
// `boundary`; the w-sum along a path is compared with m n.
VariationSumReport variation_sum_check(const Chain& chain, const Eigen::VectorXd& boundary, StateId start, long runs,
                            std::uint64_t seed);

// Wilson score interval at 99% for k successes in n trials.
std::pair<double, double> wilson_interval(long successes, long trials);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_VERIFIER_HPP_
