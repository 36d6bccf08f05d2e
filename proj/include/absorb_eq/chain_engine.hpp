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

#ifndef ABSORB_EQ_CHAIN_ENGINE_HPP_
#define ABSORB_EQ_CHAIN_ENGINE_HPP_

#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/chain.hpp"

namespace absorb_eq {

using StateSet = std::vector<StateId>;

inline constexpr double kInfiniteVisits = std::numeric_limits<double>::infinity();

// Raised when an operation needs absorption with probability one but some
// closed class of non-absorbing states traps the motion.
class NonAbsorbingChainError : public std::runtime_error {
 public:
  NonAbsorbingChainError(const std::string& what, StateSet trapped)
      : std::runtime_error(what), trapped_class_(std::move(trapped)) {}
  const StateSet& trapped_class() const { return trapped_class_; }

 private:
  StateSet trapped_class_;
};

// P^taboo(s, target): probability, starting at s, that the target set is
// entered at some stage n >= 1 before the taboo set is entered at a stage
// >= 1. Exact linear solve. Throws std::invalid_argument when the two sets
// overlap.
double taboo_probability(const Chain& chain, StateId s, const StateSet& taboo, const StateSet& target);

// Same quantity for every start state at once.
Eigen::VectorXd taboo_probabilities(const Chain& chain, const StateSet& taboo, const StateSet& target);

// First closed communicating class that contains no absorbing state, or an
// empty set when the chain is absorbing.
StateSet trapped_class(const Chain& chain);
bool is_absorbing_chain(const Chain& chain);

struct PartStatistics {
  double g = 0.0;          // no-return probability after one use of the part
  double frequency = 0.0;  // f_p
  double importance = 0.0;         // importance f_p g / a(host)
  double v = 0.0;          // expected value given use and no return
  double w = 0.0;          // expected value on the next stage
  bool importance_undefined = false;  // host never left: a(host) = 0
};

// The taboo-probability calculus of one chain. Escape probabilities for all
// ordered pairs are computed on construction (one hitting solve per
// target state); everything else is derived on demand.
class ChainAnalysis {
 public:
  explicit ChainAnalysis(Chain chain);

  const Chain& chain() const { return chain_; }
  int size() const { return chain_.size(); }

  // Probability of never reaching s from t. Throws for s == t.
  double esc(StateId t, StateId s) const;
  // esc(s,t) + esc(t,s), zero on the diagonal.
  double metric(StateId s, StateId t) const;
  // Probability of reaching s at some stage >= 1 from s.
  double return_probability(StateId s) const;
  // 1 - return probability.
  double absorption_rate(StateId s) const;
  // 1 / a(s), or kInfiniteVisits when a(s) = 0.
  double expected_visits(StateId s) const;

  bool is_absorbing() const { return trapped_.empty(); }
  const StateSet& trapped() const { return trapped_; }

  // Expected terminal value, counting zero for histories that never absorb.
  Eigen::VectorXd expected_payoff(const Eigen::VectorXd& boundary) const;
  // Harmonic extension of the absorbing values. Throws
  // NonAbsorbingChainError carrying the trapped class.
  Eigen::VectorXd harmonic(const Eigen::VectorXd& boundary) const;
  // u(t) = E_t[boundary at absorption ; s never reached], u(s) = 0.
  Eigen::VectorXd no_return_value(StateId s, const Eigen::VectorXd& boundary) const;

  // g, importance, v^r, w^r of a part of (or alternative to) the transition at its
  // host. `values` is the function r on all states (normally the harmonic
  // extension of `boundary`).
  PartStatistics part_statistics(const Part& part, const Eigen::VectorXd& boundary,
                                 const Eigen::VectorXd& values) const;
  PartStatistics part_statistics(const Part& part, const Eigen::VectorXd& boundary) const;
  // No-return probability of an arbitrary next-state distribution at s.
  double no_return_probability(StateId s, const Eigen::VectorXd& row) const;

  // Expected number of visits to each state (stage 0 included) from each
  // start. Rows and columns of absorbing states are zero. Requires an
  // absorbing chain.
  Eigen::MatrixXd visit_matrix() const;

 private:
  Chain chain_;
  Eigen::MatrixXd hit_;  // hit_(t, s): probability of reaching s at a stage >= 0 from t
  StateSet trapped_;
};

double taboo_probability(const ChainAnalysis& analysis, StateId s, const StateSet& taboo, const StateSet& target);
double escape_probability(const ChainAnalysis& analysis, StateId t, StateId s);
double chain_metric(const ChainAnalysis& analysis, StateId s, StateId t);
double absorption_rate(const ChainAnalysis& analysis, StateId s);
PartStatistics part_statistics(const ChainAnalysis& analysis, const Part& part, const Eigen::VectorXd& boundary);
Eigen::VectorXd harmonic_payoffs(const Chain& chain, const Eigen::VectorXd& boundary);

// Largest violations of the escape/absorption identities over all pairs of
// distinct non-absorbing states and the esc-composition inequality over all
// triples of distinct states. Positive numbers are violations.
struct IdentityReport {
  double escape_identity = 0.0;        // |esc(s,t) - P^{s,t}(s,A) / (P^s(s,t) + P^{s,t}(s,A))|
  double escape_identity_alt = 0.0;    // same with the 1 - P^{A u t}(s,s) denominator
  double rate_identity = 0.0;        // |a(s) - P^s(s,t) esc(t,s) - P^{s,t}(s,A)|
  double escape_bounds = 0.0;     // worst excess in the three inequalities
  double composition = 0.0;
  double metric = 0.0;     // symmetry and zero diagonal of metric
  int pairs = 0;
  bool holds(double tol) const {
    return escape_identity <= tol && escape_identity_alt <= tol && rate_identity <= tol && escape_bounds <= tol && composition <= tol && metric <= tol;
  }
};
IdentityReport check_taboo_identities(const ChainAnalysis& analysis);

struct ReplacementBoundReport {
  Eigen::VectorXd old_values;
  Eigen::VectorXd new_values;
  std::map<StateId, double> g;          // g(p_s) in the original chain
  std::map<StateId, double> new_rate;   // a_*(s) in the replaced chain
  std::map<StateId, double> delta;      // delta_s used
  std::map<StateId, double> epsilon;    // epsilon_s used
  bool hypotheses_hold = true;
  std::vector<std::string> hypothesis_failures;
  bool new_chain_absorbing = false;
  double bound = 0.0;                   // sum_t delta_t / epsilon_t
  double max_deviation = 0.0;           // max_s |r_*(s) - r(s)|
  bool holds = false;
};

// Replaces the transition at each listed non-absorbing state by the given
// next-state distribution and checks |r_* - r| <= sum delta/epsilon. When
// delta or epsilon is absent for a state, the tightest admissible value is
// used: delta_s = |v^r(p_s) - r(s)| and epsilon_s = min(1, a_*(s)/g(p_s)).
// Throws std::invalid_argument when some g(p_s) = 0 and
// NonAbsorbingChainError when the original chain is not absorbing.
ReplacementBoundReport replacement_value_bound(const Chain& chain, const std::map<StateId, Eigen::VectorXd>& replacements,
                            const Eigen::VectorXd& boundary, const std::map<StateId, double>& delta = {},
                            const std::map<StateId, double>& epsilon = {});

struct VisitRatioReport {
  double gamma = 0.0;               // esc(t,s)
  double first_ratio_excess = 0.0;  // factor distance of P^t(t,s) metric(s,t) from a(t), minus 2 gamma
  double visits_excess_from_s = 0.0;  // shortfall of the visit-ratio bound, start at s
  double visits_excess_from_t = 0.0;  // same, start at t
  bool visits_applicable = false;   // absorbing chain and P^s(s,t) > 0
  bool holds = false;
};

// Checks, for distinct non-absorbing s, t with esc(t,s) < 1, that
// P^t(t,s) metric(s,t) is within a factor 2 esc(t,s) of a(t) and that the
// ratio of expected visits to s and to t (from s and from t) is at least
// (1 - 4 esc(t,s)) P^t(t,s) / P^s(s,t). The visit ratio is only compared
// in absorbing chains with P^s(s,t) > 0; otherwise the right-hand side is
// infinite or the counts are. In an absorbing chain the ratio started at s
// is P^t(t,s) / ((1 - esc(t,s)) P^s(s,t)) and the ratio started at t is
// (1 - esc(s,t)) P^t(t,s) / P^s(s,t), so the bound from t only holds when
// esc(s,t) <= 4 esc(t,s); `holds` reports the bound for both starts as
// stated.
VisitRatioReport visit_ratio_check(const ChainAnalysis& analysis, StateId s, StateId t);

// Relative distance used for "x and y differ by a factor of at most f":
// the smallest f with (1 - f) x <= y and (1 - f) y <= x. Zero when both are
// zero, one when exactly one is zero.
double factor_distance(double x, double y);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_CHAIN_ENGINE_HPP_
