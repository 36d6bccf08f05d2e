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

// Surgery on Markov chains: removing rare moves, extending and contracting
// along a partition with exits, replacing single transitions, and the
// value-preserving polarization sweep. Every operation recomputes the
// quantities its guarantee talks about and reports them next to the bound.

#ifndef ABSORB_EQ_TRANSFORMS_HPP_
#define ABSORB_EQ_TRANSFORMS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/chain.hpp"
#include "absorb_eq/chain_engine.hpp"
#include "absorb_eq/game_model.hpp"

namespace absorb_eq {

// ---------------------------------------------------------------------------
// Simplification.

struct MoveRemoval {
  StateId state = 0;
  int player = 1;  // 1 or 2
  int action = 0;
};

struct ProfileSimplification {
  StrategyProfile profile;
  // Removed frequency per state, for each player.
  std::vector<double> removed_p1;
  std::vector<double> removed_p2;
};

struct ChainSimplification {
  Chain chain;
  std::vector<double> removed;  // removed frequency per state
};

// Sets the listed moves (or parts) to zero and renormalizes what remains.
// Throws std::invalid_argument when everything at some state is removed.
ProfileSimplification simplify(const GameSpec& game, const StrategyProfile& profile,
                               const std::vector<MoveRemoval>& removals);
ChainSimplification simplify(const Chain& chain, const std::map<StateId, std::vector<int>>& removed_parts);

// Every move played with positive frequency below `threshold`.
std::vector<MoveRemoval> rare_moves(const GameSpec& game, const StrategyProfile& profile, double threshold);

// Subtracts an unconditional mass vector from the row at s and renormalizes;
// the decomposition at s collapses to one part.
Chain remove_mass(const Chain& chain, StateId s, const Eigen::VectorXd& mass);

// ---------------------------------------------------------------------------
// Removal bounds.

struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const { return lhs <= rhs + 1e-9; }
};

struct RemovalReport {
  bool hypotheses_hold = true;
  std::vector<std::string> hypothesis_failures;
  std::vector<BoundCheck> checks;
  bool conclusions_hold() const;
  double worst_margin() const;  // max over checks of lhs - rhs
};

// Replacing the transition at t by the part p keeps the t- and s-based
// escape probabilities to `target` (avoiding `avoid`) within the fraction
// of it that went through p. `gamma` defaults to that fraction.
RemovalReport check_part_replacement(const Chain& chain, StateId s, StateId t, const StateSet& target,
                                     const StateSet& avoid, const Part& part,
                                     std::optional<double> gamma = std::nullopt);

// Removal of at most gamma P^{T u u}(u, target) of frequency at each u in
// U outside the target (at most gamma inside it), followed by
// normalization, keeps every P^{T u x}(x, target) above (1 - gamma|U|) of
// its value and increases no P^{T u target}(a, x) by more than a factor
// 1/(1 - 3|U| gamma).
RemovalReport check_frequency_removal(const Chain& chain, const StateSet& taboo, const StateSet& target,
                                      const std::map<StateId, Eigen::VectorXd>& removed_mass, double gamma);

// Removing parts q^t, each carrying at most gamma of P^t(t,s), at every t
// in T keeps s reachable from all of T when |T| gamma < 1.
RemovalReport check_reachability_survival(const Chain& chain, StateId s,
                                          const std::map<StateId, Part>& removed_parts, double gamma);

struct GameRemovals {
  // Removed (unconditional) frequency per Player One move at each state of U.
  std::map<StateId, Eigen::VectorXd> p1_removed;
  // Removed part y_*^u of Player Two's strategy at each state of U, as an
  // unconditional mass over Player Two's moves.
  std::map<StateId, Eigen::VectorXd> p2_removed;
};

// Game form of the removal bounds: after removing the given Player One and
// Player Two frequencies in U, there is still motion from all of R to s and
// from s to t, provided (1 - 4 gamma |U|) epsilon > delta |U| and the
// per-state removal bounds hold.
RemovalReport check_game_removal(const GameSpec& game, const StrategyProfile& profile, const StateSet& region,
                                 const StateSet& changed, StateId s, StateId t, const GameRemovals& removals,
                                 double gamma, double delta, double epsilon);

// ---------------------------------------------------------------------------
// Relative perturbations.

struct PerturbationReport {
  double max_entry_factor = 0.0;     // largest factor_distance over changed entries
  double max_taboo_factor = 0.0;     // over all enumerated (start, taboo, target)
  double taboo_bound = 0.0;          // 4 gamma |U|
  double max_harmonic_gap = 0.0;
  double harmonic_bound = 0.0;       // 4 gamma |U| M
  int taboo_pairs = 0;
  bool perturbed_absorbing = false;
  bool hypotheses_hold = true;
  std::vector<std::string> hypothesis_failures;
  bool holds = false;
};

// Compares every taboo probability of the two chains over all pairs of
// disjoint (taboo, target) sets (exhaustive up to 7 states, otherwise all
// pairs of sets with at most two states) and the harmonic extensions of
// `boundary`. Throws std::invalid_argument when the zero pattern changes
// or rows outside `changed` differ.
PerturbationReport relative_perturbation_bound(const Chain& chain, const Chain& perturbed, const StateSet& changed,
                                               double gamma, const Eigen::VectorXd& boundary);

// ---------------------------------------------------------------------------
// Extension and contraction along a partition with exits.

struct ExitSystem {
  // Partition of the non-absorbing states. Absorbing states are implicit
  // singletons.
  std::vector<StateSet> blocks;
  // Representative per block (defaults to the first member).
  std::vector<StateId> representatives;
  // Exit parts at each non-absorbing state; their union must carry all
  // motion leaving the block.
  std::map<StateId, std::vector<Part>> exits;
};

// Exits that are exactly the out-of-block motion; singleton blocks use
// their whole row.
ExitSystem default_exits(const Chain& chain, const std::vector<StateSet>& blocks);

struct ContractionResult {
  Chain extended;                 // S_*: copies s^a (all states) and s^b (non-absorbing)
  Chain contracted;               // S_#: one state per block plus the absorbing states
  std::vector<StateId> a_copy;    // state -> index of s^a in `extended`
  std::vector<StateId> b_copy;    // state -> index of s^b, -1 for absorbing states
  std::vector<StateId> contracted_index;  // state -> index of its block in `contracted`
  std::vector<StateId> block_of;  // state -> block index, -1 for absorbing states
  std::vector<StateId> representative_of;  // state -> representative (itself if absorbing)
  std::vector<Eigen::VectorXd> exit_mass;  // per state, union of exits (unconditional)
  int non_singleton_blocks = 0;   // N
  double exit_avoidance_gap = 0.0;  // max over blocks, pairs of 1 - P(no exit on the way t -> s)
};

struct ContractionReport {
  double delta = 0.0;
  double taboo_factor_from_b = 0.0;  // max factor, start at s^b
  double taboo_factor_from_a = 0.0;  // max factor, start at s^a with s outside both sets
  double taboo_bound = 0.0;          // 4 N delta
  double representative_gap = 0.0;   // max |r_*(s^a_R) - r_#(s_R)|
  double harmonic_gap = 0.0;         // max |r_*(s^a) - r(s)|
  double harmonic_bound = 0.0;       // 4 M N delta
  int taboo_pairs = 0;
  bool hypotheses_hold = true;
  std::vector<std::string> hypothesis_failures;
  bool holds = false;                // taboo bound from s^b, representatives, harmonic bound
};

// Builds S_* and S_#. Throws NonAbsorbingChainError for a non-absorbing
// input and std::invalid_argument for an inconsistent exit system.
ContractionResult contract(const Chain& chain, const ExitSystem& exits);

// Verifies the contraction guarantees for the caller's delta (the minimal
// admissible delta is result.exit_avoidance_gap).
ContractionReport check_contraction(const Chain& chain, const ContractionResult& result, double delta,
                                    const Eigen::VectorXd& boundary);

struct ExitStatistics {
  double g = 0.0, g_contracted = 0.0;
  double importance = 0.0, importance_contracted = 0.0;
  double v = 0.0, v_contracted = 0.0;
  double frequency_contracted = 0.0;
  std::vector<BoundCheck> checks;  // the five comparisons
  bool holds() const;
};

// Compares an exit at its host in the original chain with the same exit
// at the representative in the contracted chain. Throws
// std::invalid_argument when g(exit) = 0.
ExitStatistics exit_statistics_compare(const Chain& chain, const ContractionResult& result, const Part& exit,
                                       double delta, const Eigen::VectorXd& boundary);

// ---------------------------------------------------------------------------
// Single-state replacement.

enum class ReplacementMode { kPartOfRow, kReplacement, kConvex };

struct ReplacementResult {
  Chain chain;
  bool absorbing = false;
  double min_rate_ratio = 1.0;  // min over s != t of a_new(s) / a_old(s)
  double epsilon = 0.0;
  bool holds = false;
};

// Mode kPartOfRow uses `part` (a part of the row at t with importance >= epsilon),
// mode kReplacement uses `replacement` (g >= epsilon), and kConvex uses
// lambda * part + (1 - lambda) * replacement. Throws std::invalid_argument
// when the mode's precondition fails.
ReplacementResult replace_transition(const Chain& chain, StateId t, ReplacementMode mode, double epsilon,
                                     const std::optional<Part>& part, const std::optional<Eigen::VectorXd>& replacement,
                                     double lambda = 1.0);

// ---------------------------------------------------------------------------
// Polarization.

struct PolarizationParts {
  std::optional<Eigen::VectorXd> low_part;     // p*_s as unconditional mass (part of the row)
  std::optional<Eigen::VectorXd> alternative;  // p_s, a replacement row
  std::optional<Eigen::VectorXd> high_part;    // q_s as unconditional mass (part of the row)
};

struct PolarizationReport {
  StateSet polarized;                   // T in selection order
  std::map<StateId, double> lambda;
  std::map<StateId, double> selection_importance;  // nu_{T,*}(p*_t) when t was added
  double lambda_residual = 0.0;         // max |lambda w2(p) + (1-lambda) w2(q) - r2|
  double r2_drift_before_discard = 0.0; // max |r2_{T,*} - r2|
  double deviation1 = 0.0;              // max |r1_T - r1|
  double deviation2 = 0.0;
  double high_part_v1_gap = 0.0;        // max |v1(q_t) - r1(t)| over t in T
  bool absorbing = false;
  bool within_constants = false;            // delta below the stated constant
  bool hypotheses_hold = true;
  std::vector<std::string> hypothesis_failures;
  bool holds = false;
};

struct PolarizationResult {
  Chain chain;
  PolarizationReport report;
};

PolarizationResult polarize(const Chain& chain, const Eigen::VectorXd& boundary1, const Eigen::VectorXd& boundary2,
                            const std::map<StateId, PolarizationParts>& parts, double epsilon, double delta,
                            double gamma);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_TRANSFORMS_HPP_
