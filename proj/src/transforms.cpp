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

#include "absorb_eq/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "linear_solve.hpp"

namespace absorb_eq {

namespace {

constexpr double kMassTolerance = 1e-9;
constexpr double kBoundSlack = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(6);
  out << x;
  return out.str();
}

Eigen::VectorXd normalized(const Eigen::VectorXd& v) {
  const double total = v.sum();
  if (!(total > 0.0)) throw std::invalid_argument("cannot normalize a zero vector");
  return v / total;
}

bool reaches(const Chain& chain, StateId from, StateId to) {
  return detail::reachable_from(chain.kernel(), from, std::vector<bool>(chain.size(), false))[to];
}

StateSet with_state(StateSet set, StateId s) {
  if (std::find(set.begin(), set.end(), s) == set.end()) set.push_back(s);
  return set;
}

bool contains(const StateSet& set, StateId s) { return std::find(set.begin(), set.end(), s) != set.end(); }

// Range of the boundary over the absorbing states.
double boundary_spread(const Chain& chain, const Eigen::VectorXd& boundary) {
  double lo = kInf, hi = -kInf;
  for (StateId a : chain.absorbing_states()) {
    lo = std::min(lo, boundary(a));
    hi = std::max(hi, boundary(a));
  }
  return hi >= lo ? hi - lo : 0.0;
}

void check_mass_within_row(const Chain& chain, StateId s, const Eigen::VectorXd& mass, const std::string& what) {
  if (mass.size() != chain.size()) throw DimensionError(what + " has wrong length");
  if ((mass.array() < -kMassTolerance).any()) throw std::invalid_argument(what + " has negative mass");
  if (((mass - chain.row(s)).array() > kMassTolerance).any()) {
    throw std::invalid_argument(what + " exceeds the transition at " + chain.name(s));
  }
}

// Pairs of disjoint unions of the given units, with a non-empty target.
// Exhaustive up to seven units, otherwise unions of at most two units.
std::vector<std::pair<StateSet, StateSet>> disjoint_pairs(const std::vector<StateSet>& units) {
  const int k = static_cast<int>(units.size());
  std::vector<std::pair<StateSet, StateSet>> out;
  auto flatten = [&units](const std::vector<int>& ids) {
    StateSet set;
    for (int i : ids) set.insert(set.end(), units[i].begin(), units[i].end());
    return set;
  };
  if (k <= 7) {
    int total = 1;
    for (int i = 0; i < k; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<int> taboo, target;
      int c = code;
      for (int i = 0; i < k; ++i, c /= 3) {
        if (c % 3 == 1) taboo.push_back(i);
        if (c % 3 == 2) target.push_back(i);
      }
      if (!target.empty()) out.emplace_back(flatten(taboo), flatten(target));
    }
    return out;
  }
  std::vector<std::vector<int>> small{{}};
  for (int i = 0; i < k; ++i) {
    small.push_back({i});
    for (int j = i + 1; j < k; ++j) small.push_back({i, j});
  }
  for (const auto& taboo : small) {
    for (const auto& target : small) {
      if (target.empty()) continue;
      bool overlap = false;
      for (int i : taboo) overlap = overlap || std::find(target.begin(), target.end(), i) != target.end();
      if (!overlap) out.emplace_back(flatten(taboo), flatten(target));
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Simplification.

ProfileSimplification simplify(const GameSpec& game, const StrategyProfile& profile,
                               const std::vector<MoveRemoval>& removals) {
  check_profile(game, profile);
  const int n = game.num_states();
  ProfileSimplification out;
  out.profile = profile;
  out.removed_p1.assign(n, 0.0);
  out.removed_p2.assign(n, 0.0);
  std::set<std::pair<StateId, int>> touched;
  for (const MoveRemoval& r : removals) {
    if (r.state < 0 || r.state >= n) throw std::out_of_range("removal state out of range");
    if (r.player != 1 && r.player != 2) throw std::invalid_argument("player must be 1 or 2");
    Eigen::VectorXd& dist = r.player == 1 ? out.profile.x[r.state] : out.profile.y[r.state];
    if (r.action < 0 || r.action >= dist.size()) throw std::out_of_range("removal action out of range");
    (r.player == 1 ? out.removed_p1 : out.removed_p2)[r.state] += dist(r.action);
    dist(r.action) = 0.0;
    touched.insert({r.state, r.player});
  }
  for (const auto& [s, player] : touched) {
    Eigen::VectorXd& dist = player == 1 ? out.profile.x[s] : out.profile.y[s];
    if (!(dist.sum() > 0.0)) {
      throw std::invalid_argument("simplification removes every move of player " + std::to_string(player) +
                                  " at " + game.state(s).name);
    }
    dist /= dist.sum();
  }
  return out;
}

ChainSimplification simplify(const Chain& chain, const std::map<StateId, std::vector<int>>& removed_parts) {
  ChainSimplification out;
  out.chain = chain;
  out.removed.assign(chain.size(), 0.0);
  for (const auto& [s, indices] : removed_parts) {
    const std::vector<Part>& parts = chain.parts(s);
    std::vector<bool> drop(parts.size(), false);
    for (int i : indices) {
      if (i < 0 || i >= static_cast<int>(parts.size())) throw std::out_of_range("part index out of range");
      drop[i] = true;
    }
    double removed = 0.0;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (drop[i]) removed += parts[i].frequency;
    }
    out.removed[s] = removed;
    if (removed == 0.0) continue;
    if (removed >= 1.0 - 1e-12) throw std::invalid_argument("simplification removes the whole transition at " + chain.name(s));
    std::vector<Part> kept;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (drop[i]) continue;
      Part p = parts[i];
      p.frequency /= 1.0 - removed;
      kept.push_back(std::move(p));
    }
    out.chain = out.chain.with_parts(s, std::move(kept));
  }
  return out;
}

std::vector<MoveRemoval> rare_moves(const GameSpec& game, const StrategyProfile& profile, double threshold) {
  std::vector<MoveRemoval> out;
  for (StateId s : game.non_absorbing_states()) {
    for (int a = 0; a < profile.x[s].size(); ++a) {
      if (profile.x[s](a) > 0.0 && profile.x[s](a) < threshold) out.push_back({s, 1, a});
    }
    for (int b = 0; b < profile.y[s].size(); ++b) {
      if (profile.y[s](b) > 0.0 && profile.y[s](b) < threshold) out.push_back({s, 2, b});
    }
  }
  return out;
}

Chain remove_mass(const Chain& chain, StateId s, const Eigen::VectorXd& mass) {
  check_mass_within_row(chain, s, mass, "removed mass");
  const Eigen::VectorXd rest = (chain.row(s) - mass).cwiseMax(0.0);
  if (!(rest.sum() > 1e-15)) throw std::invalid_argument("removal empties the transition at " + chain.name(s));
  return chain.with_row(s, rest / rest.sum());
}

// ---------------------------------------------------------------------------
// Removal bounds.

bool RemovalReport::conclusions_hold() const {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.holds(); });
}

double RemovalReport::worst_margin() const {
  double worst = -kInf;
  for (const BoundCheck& c : checks) worst = std::max(worst, c.lhs - c.rhs);
  return worst;
}

RemovalReport check_part_replacement(const Chain& chain, StateId s, StateId t, const StateSet& target,
                                     const StateSet& avoid, const Part& part, std::optional<double> gamma) {
  RemovalReport report;
  auto fail = [&report](const std::string& what) { report.hypothesis_failures.push_back(what); };
  if (s == t) fail("s and t must differ");
  for (StateId v : target) {
    if (contains(avoid, v) || v == s || v == t) fail("target, avoided set and {s,t} must be disjoint");
  }
  for (StateId v : avoid) {
    if (v == s || v == t) fail("target, avoided set and {s,t} must be disjoint");
  }
  check_mass_within_row(chain, t, part.mass(), "part");

  const StateSet avoid_t = with_state(avoid, t);
  const StateSet avoid_s = with_state(avoid, s);
  const double base_t = taboo_probability(chain, t, avoid_t, target);
  const double base_s = taboo_probability(chain, s, avoid_s, target);
  // Complement of the part bounces back to t.
  Eigen::VectorXd through_row = part.mass();
  through_row(t) += 1.0 - part.frequency;
  const double through = taboo_probability(chain.with_row(t, through_row), t, avoid_t, target);
  const double fraction = base_t > 0.0 ? through / base_t : 1.0;
  const double g = gamma.value_or(fraction);
  if (!(g > 0.0) || g > 1.0) fail("gamma outside (0,1]: " + fmt(g));
  if (g > fraction + kBoundSlack) fail("gamma " + fmt(g) + " exceeds the share through the part " + fmt(fraction));

  const Chain replaced = chain.with_row(t, part.row);
  report.checks.push_back({"t escapes to target", g * base_t, taboo_probability(replaced, t, avoid_t, target)});
  report.checks.push_back({"s escapes to target", g * base_s, taboo_probability(replaced, s, avoid_s, target)});
  report.hypotheses_hold = report.hypothesis_failures.empty();
  return report;
}

RemovalReport check_frequency_removal(const Chain& chain, const StateSet& taboo, const StateSet& target,
                                      const std::map<StateId, Eigen::VectorXd>& removed_mass, double gamma) {
  RemovalReport report;
  auto fail = [&report](const std::string& what) { report.hypothesis_failures.push_back(what); };
  const int u_count = static_cast<int>(removed_mass.size());
  for (StateId v : taboo) {
    if (contains(target, v) || removed_mass.count(v)) fail("taboo set meets the target or the changed states");
  }
  if (u_count > 0 && !(gamma > 0.0 && gamma < 1.0 / (2.0 * u_count))) fail("gamma outside (0, 1/(2|U|))");

  Chain changed = chain;
  for (const auto& [u, mass] : removed_mass) {
    check_mass_within_row(chain, u, mass, "removed mass");
    const double f = mass.sum();
    const double allowed = contains(target, u) ? gamma : gamma * taboo_probability(chain, u, with_state(taboo, u), target);
    if (f > allowed + kBoundSlack) {
      fail("removal at " + chain.name(u) + " is " + fmt(f) + ", above the allowance " + fmt(allowed));
    }
    if (f > 0.0) changed = remove_mass(changed, u, mass);
  }

  const double keep = 1.0 - gamma * u_count;
  for (StateId x = 0; x < chain.size(); ++x) {
    if (contains(target, x)) continue;
    const StateSet tx = with_state(taboo, x);
    report.checks.push_back({"escape from " + chain.name(x), keep * taboo_probability(chain, x, tx, target),
                             taboo_probability(changed, x, tx, target)});
  }
  StateSet taboo_target = taboo;
  taboo_target.insert(taboo_target.end(), target.begin(), target.end());
  const double shrink = 1.0 - 3.0 * u_count * gamma;
  for (StateId x = 0; x < chain.size(); ++x) {
    if (contains(taboo_target, x)) continue;
    const Eigen::VectorXd before = taboo_probabilities(chain, taboo_target, {x});
    const Eigen::VectorXd after = taboo_probabilities(changed, taboo_target, {x});
    for (StateId a : target) {
      report.checks.push_back({"entry " + chain.name(a) + " -> " + chain.name(x), shrink * after(a), before(a)});
    }
  }
  report.hypotheses_hold = report.hypothesis_failures.empty();
  return report;
}

RemovalReport check_reachability_survival(const Chain& chain, StateId s,
                                          const std::map<StateId, Part>& removed_parts, double gamma) {
  RemovalReport report;
  auto fail = [&report](const std::string& what) { report.hypothesis_failures.push_back(what); };
  const int count = static_cast<int>(removed_parts.size());
  if (!(count * gamma < 1.0)) fail("|T| gamma must be below 1");
  Chain changed = chain;
  for (const auto& [t, part] : removed_parts) {
    if (t == s) {
      fail("s must lie outside T");
      continue;
    }
    check_mass_within_row(chain, t, part.mass(), "removed part");
    const double base = taboo_probability(chain, t, {t}, {s});
    if (!(base > 0.0)) fail(chain.name(s) + " is not reached from " + chain.name(t));
    const double through = taboo_probability(chain.with_row(t, part.row), t, {t}, {s});
    if (part.frequency * through > gamma * base + kBoundSlack) {
      fail("removed part at " + chain.name(t) + " carries more than gamma of the motion to " + chain.name(s));
    }
    if (part.frequency > 0.0) changed = remove_mass(changed, t, part.mass());
  }
  for (const auto& [t, part] : removed_parts) {
    if (t == s) continue;
    report.checks.push_back({"reach " + chain.name(s) + " from " + chain.name(t), reaches(changed, t, s) ? 0.0 : 1.0, 0.0});
  }
  report.hypotheses_hold = report.hypothesis_failures.empty();
  return report;
}

namespace {

// P^u(u, z), reading P^u(u, u) as the return probability.
double first_passage(const Chain& chain, StateId u, StateId z) {
  return u == z ? taboo_probability(chain, u, {}, {u}) : taboo_probability(chain, u, {u}, {z});
}

}  // namespace

RemovalReport check_game_removal(const GameSpec& game, const StrategyProfile& profile, const StateSet& region,
                                 const StateSet& changed, StateId s, StateId t, const GameRemovals& removals,
                                 double gamma, double delta, double epsilon) {
  RemovalReport report;
  auto fail = [&report](const std::string& what) { report.hypothesis_failures.push_back(what); };
  const Chain base = induce_chain(game, profile);
  const int u_count = static_cast<int>(changed.size());
  if (s == t || !contains(changed, s) || !contains(changed, t)) fail("s and t must be distinct members of U");
  for (StateId u : changed) {
    if (!contains(region, u)) fail("U must lie inside R");
  }
  for (StateId u : region) {
    if (game.is_absorbing(u)) fail("R must contain non-absorbing states only");
    for (StateId v : region) {
      if (u != v && !reaches(base, u, v)) fail("no motion from " + game.state(u).name + " to " + game.state(v).name);
    }
  }
  if (!((1.0 - 4.0 * gamma * u_count) * epsilon > delta * u_count)) fail("(1 - 4 gamma |U|) epsilon <= delta |U|");

  StrategyProfile x_bar = profile;
  for (const auto& [u, removed] : removals.p1_removed) {
    if (!contains(changed, u)) fail("Player One removal outside U");
    if (removed.size() != profile.x[u].size() || ((removed - profile.x[u]).array() > kMassTolerance).any() ||
        (removed.array() < 0.0).any()) {
      throw std::invalid_argument("Player One removal does not fit the strategy at " + game.state(u).name);
    }
    const double allowed = u == s ? gamma : gamma * taboo_probability(base, u, {u}, {s});
    if (removed.sum() > allowed + kBoundSlack) fail("Player One removal at " + game.state(u).name + " above allowance");
    x_bar.x[u] = normalized((profile.x[u] - removed).cwiseMax(0.0));
  }
  const Chain after_x = induce_chain(game, x_bar);
  const double s_to_t = taboo_probability(base, s, {s}, {t});
  if (taboo_probability(after_x, s, {s}, {t}) < epsilon * s_to_t - kBoundSlack) {
    fail("motion from s to t drops below epsilon after Player One removals");
  }

  StrategyProfile y_bar = x_bar;
  for (const auto& [u, removed] : removals.p2_removed) {
    if (!contains(changed, u)) fail("Player Two removal outside U");
    if (removed.size() != profile.y[u].size() || ((removed - profile.y[u]).array() > kMassTolerance).any() ||
        (removed.array() < 0.0).any()) {
      throw std::invalid_argument("Player Two removal does not fit the strategy at " + game.state(u).name);
    }
    const double f = removed.sum();
    if (f > 0.0) {
      StrategyProfile only = profile;
      only.y[u] = removed / f;
      const Chain restricted = induce_chain(game, only);
      for (StateId z : {s, t}) {
        if (f * first_passage(restricted, u, z) > delta * first_passage(base, u, z) + kBoundSlack) {
          fail("Player Two removal at " + game.state(u).name + " carries more than delta of the motion to " +
               game.state(z).name);
        }
      }
    }
    y_bar.y[u] = normalized((profile.y[u] - removed).cwiseMax(0.0));
  }
  const Chain after = induce_chain(game, y_bar);
  for (StateId v : region) {
    if (v == s) continue;
    report.checks.push_back({"reach " + game.state(s).name + " from " + game.state(v).name, reaches(after, v, s) ? 0.0 : 1.0, 0.0});
  }
  report.checks.push_back({"reach " + game.state(t).name + " from " + game.state(s).name, reaches(after, s, t) ? 0.0 : 1.0, 0.0});
  report.hypotheses_hold = report.hypothesis_failures.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Relative perturbations.

PerturbationReport relative_perturbation_bound(const Chain& chain, const Chain& perturbed, const StateSet& changed,
                                               double gamma, const Eigen::VectorXd& boundary) {
  const int n = chain.size();
  if (perturbed.size() != n) throw DimensionError("chains differ in size");
  if (chain.absorbing_flags() != perturbed.absorbing_flags()) throw std::invalid_argument("absorbing sets differ");
  PerturbationReport report;
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      const double p = chain.q(s, t), q = perturbed.q(s, t);
      if ((p > 0.0) != (q > 0.0)) throw std::invalid_argument("perturbation changes the zero pattern at " + chain.name(s));
      if (!contains(changed, s)) {
        if (std::abs(p - q) > 1e-12) throw std::invalid_argument("row outside the changed set differs at " + chain.name(s));
      } else {
        report.max_entry_factor = std::max(report.max_entry_factor, factor_distance(p, q));
      }
    }
  }
  const int u_count = static_cast<int>(changed.size());
  if (report.max_entry_factor > gamma + 1e-12) {
    report.hypothesis_failures.push_back("entries change by factor " + fmt(report.max_entry_factor) + " > gamma");
  }
  if (u_count > 0 && !(gamma > 0.0 && gamma < 1.0 / (2.0 * u_count))) {
    report.hypothesis_failures.push_back("gamma outside (0, 1/(2|U|))");
  }
  report.hypotheses_hold = report.hypothesis_failures.empty();
  report.taboo_bound = 4.0 * gamma * u_count;

  std::vector<StateSet> units;
  for (int s = 0; s < n; ++s) units.push_back({s});
  for (const auto& [taboo, target] : disjoint_pairs(units)) {
    const Eigen::VectorXd before = taboo_probabilities(chain, taboo, target);
    const Eigen::VectorXd after = taboo_probabilities(perturbed, taboo, target);
    for (int s = 0; s < n; ++s) report.max_taboo_factor = std::max(report.max_taboo_factor, factor_distance(before(s), after(s)));
    ++report.taboo_pairs;
  }

  const ChainAnalysis original(chain);
  const ChainAnalysis changed_analysis(perturbed);
  report.perturbed_absorbing = changed_analysis.is_absorbing();
  report.harmonic_bound = report.taboo_bound * boundary_spread(chain, boundary);
  if (original.is_absorbing()) {
    report.max_harmonic_gap =
        (original.harmonic(boundary) - changed_analysis.expected_payoff(boundary)).cwiseAbs().maxCoeff();
  }
  report.holds = original.is_absorbing() && report.perturbed_absorbing &&
                 report.max_taboo_factor <= report.taboo_bound + kBoundSlack &&
                 report.max_harmonic_gap <= report.harmonic_bound + kBoundSlack;
  return report;
}

// ---------------------------------------------------------------------------
// Extension and contraction.

ExitSystem default_exits(const Chain& chain, const std::vector<StateSet>& blocks) {
  ExitSystem system;
  system.blocks = blocks;
  for (const StateSet& block : blocks) {
    if (block.empty()) throw std::invalid_argument("empty block");
    system.representatives.push_back(block.front());
    for (StateId s : block) {
      Eigen::VectorXd out = chain.row(s);
      if (block.size() > 1) {
        for (StateId u : block) out(u) = 0.0;
      }
      std::vector<Part> exits;
      if (out.sum() > 0.0) exits.push_back(part_from_mass(s, out, "exit"));
      system.exits[s] = std::move(exits);
    }
  }
  return system;
}

ContractionResult contract(const Chain& chain, const ExitSystem& exits) {
  const ChainAnalysis analysis(chain);
  if (!analysis.is_absorbing()) {
    throw NonAbsorbingChainError("contraction needs an absorbing chain", analysis.trapped());
  }
  const int n = chain.size();
  ContractionResult out;
  out.block_of.assign(n, -1);
  out.representative_of.resize(n);
  for (int s = 0; s < n; ++s) out.representative_of[s] = s;
  std::vector<StateId> reps = exits.representatives;
  if (reps.empty()) {
    for (const StateSet& block : exits.blocks) {
      if (block.empty()) throw std::invalid_argument("empty block");
      reps.push_back(block.front());
    }
  }
  if (reps.size() != exits.blocks.size()) throw std::invalid_argument("one representative per block is required");
  for (size_t k = 0; k < exits.blocks.size(); ++k) {
    const StateSet& block = exits.blocks[k];
    if (!contains(block, reps[k])) throw std::invalid_argument("representative outside its block");
    if (block.size() > 1) ++out.non_singleton_blocks;
    for (StateId s : block) {
      if (s < 0 || s >= n) throw std::out_of_range("block state out of range");
      if (chain.is_absorbing(s)) throw std::invalid_argument("absorbing states cannot join a block");
      if (out.block_of[s] != -1) throw std::invalid_argument("blocks overlap at " + chain.name(s));
      out.block_of[s] = static_cast<StateId>(k);
      out.representative_of[s] = reps[k];
    }
  }
  for (int s = 0; s < n; ++s) {
    if (!chain.is_absorbing(s) && out.block_of[s] == -1) throw std::invalid_argument("state " + chain.name(s) + " is in no block");
  }

  // Exit masses and the out-of-block condition.
  out.exit_mass.assign(n, Eigen::VectorXd::Zero(n));
  for (int s = 0; s < n; ++s) {
    if (chain.is_absorbing(s)) continue;
    const auto it = exits.exits.find(s);
    if (it != exits.exits.end()) {
      for (const Part& p : it->second) out.exit_mass[s] += p.mass();
    }
    check_mass_within_row(chain, s, out.exit_mass[s], "exit system");
    const Eigen::VectorXd inner = chain.row(s) - out.exit_mass[s];
    for (int u = 0; u < n; ++u) {
      if (out.block_of[u] != out.block_of[s] && inner(u) > kMassTolerance) {
        throw std::invalid_argument("motion from " + chain.name(s) + " to " + chain.name(u) + " bypasses the exits");
      }
    }
  }

  // S_*: a-copies keep the original indices, b-copies follow.
  out.a_copy.resize(n);
  out.b_copy.assign(n, -1);
  int next = n;
  for (int s = 0; s < n; ++s) {
    out.a_copy[s] = s;
    if (!chain.is_absorbing(s)) out.b_copy[s] = next++;
  }
  const int m = next;
  Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(m, m);
  std::vector<bool> ext_absorbing(m, false);
  std::vector<std::string> ext_names(m);
  for (int s = 0; s < n; ++s) {
    if (chain.is_absorbing(s)) {
      ext(s, s) = 1.0;
      ext_absorbing[s] = true;
      ext_names[s] = chain.name(s);
      continue;
    }
    ext_names[s] = chain.name(s) + "^a";
    ext_names[out.b_copy[s]] = chain.name(s) + "^b";
    ext(s, out.b_copy[out.representative_of[s]]) = 1.0;
    const Eigen::VectorXd inner = (chain.row(s) - out.exit_mass[s]).cwiseMax(0.0);
    for (int u = 0; u < n; ++u) {
      ext(out.b_copy[s], out.a_copy[u]) += out.exit_mass[s](u);
      if (out.block_of[u] == out.block_of[s] && inner(u) > 0.0) ext(out.b_copy[s], out.b_copy[u]) += inner(u);
    }
    ext.row(out.b_copy[s]) /= ext.row(out.b_copy[s]).sum();
  }
  out.extended = Chain(ext, ext_absorbing, ext_names);

  // S_#: the first a-copy reached from s_P^b, mapped to its block.
  out.contracted_index.assign(n, -1);
  std::vector<StateId> members;
  for (int s = 0; s < n; ++s) {
    if (chain.is_absorbing(s) || out.representative_of[s] == s) {
      out.contracted_index[s] = static_cast<StateId>(members.size());
      members.push_back(s);
    }
  }
  for (int s = 0; s < n; ++s) out.contracted_index[s] = out.contracted_index[out.representative_of[s]];
  std::vector<int> b_states;
  for (int s = 0; s < n; ++s) {
    if (out.b_copy[s] >= 0) b_states.push_back(out.b_copy[s]);
  }
  const int nb = static_cast<int>(b_states.size());
  Eigen::MatrixXd to_a(nb, n);
  for (int i = 0; i < nb; ++i) {
    for (int u = 0; u < n; ++u) to_a(i, u) = ext(b_states[i], u);
  }
  const Eigen::MatrixXd first_a = nb > 0 ? detail::solve_transient(ext, b_states, to_a) : Eigen::MatrixXd(0, n);
  const int k = static_cast<int>(members.size());
  Eigen::MatrixXd sharp = Eigen::MatrixXd::Zero(k, k);
  std::vector<bool> sharp_absorbing(k, false);
  std::vector<std::string> sharp_names(k);
  for (int i = 0; i < k; ++i) {
    const StateId s = members[i];
    sharp_names[i] = chain.name(s);
    if (chain.is_absorbing(s)) {
      sharp(i, i) = 1.0;
      sharp_absorbing[i] = true;
      continue;
    }
    const int row = out.b_copy[s] - n;
    for (int u = 0; u < n; ++u) sharp(i, out.contracted_index[u]) += std::max(0.0, first_a(row, u));
    sharp.row(i) /= sharp.row(i).sum();
  }
  out.contracted = Chain(sharp, sharp_absorbing, sharp_names);

  // Exit avoidance: from t^b reach s^b before any a-copy.
  StateSet a_states;
  for (int s = 0; s < n; ++s) a_states.push_back(s);
  for (const StateSet& block : exits.blocks) {
    for (StateId s : block) {
      const Eigen::VectorXd reach = taboo_probabilities(out.extended, a_states, {out.b_copy[s]});
      for (StateId t : block) {
        if (t != s) out.exit_avoidance_gap = std::max(out.exit_avoidance_gap, 1.0 - reach(out.b_copy[t]));
      }
    }
  }
  return out;
}

ContractionReport check_contraction(const Chain& chain, const ContractionResult& result, double delta,
                                    const Eigen::VectorXd& boundary) {
  const int n = chain.size();
  ContractionReport report;
  report.delta = delta;
  const int big = result.non_singleton_blocks;
  if (delta + 1e-12 < result.exit_avoidance_gap) {
    report.hypothesis_failures.push_back("exits are avoided only with probability " + fmt(1.0 - result.exit_avoidance_gap) +
                                         " < 1 - delta");
  }
  if (big > 0 && !(delta > 0.0 && delta < 1.0 / (2.0 * big))) report.hypothesis_failures.push_back("delta outside (0, 1/(2N))");
  report.hypotheses_hold = report.hypothesis_failures.empty();
  report.taboo_bound = 4.0 * big * delta;

  // Units: blocks and absorbing singletons.
  std::vector<StateSet> units;
  std::map<StateId, size_t> unit_of_block;
  for (int s = 0; s < n; ++s) {
    if (chain.is_absorbing(s)) {
      units.push_back({s});
    } else if (!unit_of_block.count(result.block_of[s])) {
      unit_of_block[result.block_of[s]] = units.size();
      units.push_back({});
    }
    if (!chain.is_absorbing(s)) units[unit_of_block[result.block_of[s]]].push_back(s);
  }
  auto lift = [&result](const StateSet& set) {
    StateSet out;
    for (StateId s : set) {
      out.push_back(result.a_copy[s]);
      if (result.b_copy[s] >= 0) out.push_back(result.b_copy[s]);
    }
    return out;
  };
  for (const auto& [taboo, target] : disjoint_pairs(units)) {
    const Eigen::VectorXd before = taboo_probabilities(chain, taboo, target);
    const Eigen::VectorXd after = taboo_probabilities(result.extended, lift(taboo), lift(target));
    for (int s = 0; s < n; ++s) {
      // s^a steps into s^b first, which lies in the lifted sets with s.
      if (!contains(taboo, s) && !contains(target, s)) {
        report.taboo_factor_from_a = std::max(report.taboo_factor_from_a, factor_distance(before(s), after(result.a_copy[s])));
      }
      const StateId b = result.b_copy[s] >= 0 ? result.b_copy[s] : result.a_copy[s];
      report.taboo_factor_from_b = std::max(report.taboo_factor_from_b, factor_distance(before(s), after(b)));
    }
    ++report.taboo_pairs;
  }

  const Eigen::VectorXd r = ChainAnalysis(chain).harmonic(boundary);
  Eigen::VectorXd ext_boundary = Eigen::VectorXd::Zero(result.extended.size());
  Eigen::VectorXd sharp_boundary = Eigen::VectorXd::Zero(result.contracted.size());
  for (StateId a : chain.absorbing_states()) {
    ext_boundary(result.a_copy[a]) = boundary(a);
    sharp_boundary(result.contracted_index[a]) = boundary(a);
  }
  const Eigen::VectorXd r_ext = ChainAnalysis(result.extended).harmonic(ext_boundary);
  const Eigen::VectorXd r_sharp = ChainAnalysis(result.contracted).harmonic(sharp_boundary);
  for (int s = 0; s < n; ++s) {
    report.harmonic_gap = std::max(report.harmonic_gap, std::abs(r_ext(result.a_copy[s]) - r(s)));
    if (result.representative_of[s] == s) {
      report.representative_gap =
          std::max(report.representative_gap, std::abs(r_ext(result.a_copy[s]) - r_sharp(result.contracted_index[s])));
    }
  }
  report.harmonic_bound = 4.0 * boundary_spread(chain, boundary) * big * delta;
  report.holds = report.taboo_factor_from_b <= report.taboo_bound + kBoundSlack && report.representative_gap <= 1e-9 &&
                 report.harmonic_gap <= report.harmonic_bound + kBoundSlack;
  return report;
}

bool ExitStatistics::holds() const {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.holds(); });
}

ExitStatistics exit_statistics_compare(const Chain& chain, const ContractionResult& result, const Part& exit,
                                       double delta, const Eigen::VectorXd& boundary) {
  const int n = chain.size();
  const StateId t = exit.host;
  if (t < 0 || t >= n || chain.is_absorbing(t)) throw std::invalid_argument("exit host must be non-absorbing");
  if (((exit.mass() - result.exit_mass[t]).array() > kMassTolerance).any()) {
    throw std::invalid_argument("the part is not within the exits at " + chain.name(t));
  }
  ExitStatistics st;
  const ChainAnalysis original(chain);
  const Eigen::VectorXd r = original.harmonic(boundary);
  const PartStatistics here = original.part_statistics(exit, boundary, r);
  if (!(here.g > 0.0)) throw std::invalid_argument("exit has zero no-return probability");
  st.g = here.g;
  st.importance = here.importance;
  st.v = here.v;

  // Frequency in S_#: expected non-exit visits to t^b from s_P^b, times f_p.
  const StateId rep = result.representative_of[t];
  std::vector<int> b_states;
  for (int s = 0; s < n; ++s) {
    if (result.b_copy[s] >= 0) b_states.push_back(result.b_copy[s]);
  }
  const int nb = static_cast<int>(b_states.size());
  const Eigen::MatrixXd visits =
      detail::solve_transient(result.extended.kernel(), b_states, Eigen::MatrixXd::Identity(nb, nb));
  const int from = result.b_copy[rep] - n;
  const int to = result.b_copy[t] - n;
  st.frequency_contracted = visits(from, to) * exit.frequency;

  const ChainAnalysis sharp(result.contracted);
  Eigen::VectorXd sharp_boundary = Eigen::VectorXd::Zero(result.contracted.size());
  for (StateId a : chain.absorbing_states()) sharp_boundary(result.contracted_index[a]) = boundary(a);
  Part mapped;
  mapped.host = result.contracted_index[t];
  mapped.frequency = st.frequency_contracted;
  mapped.row = Eigen::VectorXd::Zero(result.contracted.size());
  for (int u = 0; u < n; ++u) mapped.row(result.contracted_index[u]) += exit.row(u);
  const PartStatistics there = sharp.part_statistics(mapped, sharp_boundary, sharp.harmonic(sharp_boundary));
  st.g_contracted = there.g;
  st.importance_contracted = there.importance;
  st.v_contracted = there.v;

  const double big = result.non_singleton_blocks;
  const double spread = boundary_spread(chain, boundary);
  const double by_importance = st.importance > 0.0 ? 2.0 * delta / st.importance : kInf;
  st.checks.push_back({"|g - g#|", std::abs(st.g - st.g_contracted), 4.0 * big * delta + delta});
  st.checks.push_back({"g vs g# factor", factor_distance(st.g, st.g_contracted), 4.0 * big * delta + by_importance});
  st.checks.push_back({"importance vs importance# factor", factor_distance(st.importance, st.importance_contracted),
                       4.0 * big * delta + 2.0 * delta + (4.0 * big * delta + delta) / st.g});
  st.checks.push_back({"|importance - importance#|", std::abs(st.importance - st.importance_contracted), 8.0 * big * delta + 4.0 * delta});
  st.checks.push_back({"|v - v#|", std::abs(st.v - st.v_contracted),
                       spread * std::min(8.0 * big * delta + delta / st.g, 8.0 * big * delta + by_importance)});
  return st;
}

// ---------------------------------------------------------------------------
// Single-state replacement.

ReplacementResult replace_transition(const Chain& chain, StateId t, ReplacementMode mode, double epsilon,
                                     const std::optional<Part>& part, const std::optional<Eigen::VectorXd>& replacement,
                                     double lambda) {
  const ChainAnalysis before(chain);
  if (!before.is_absorbing()) throw NonAbsorbingChainError("replacement needs an absorbing chain", before.trapped());
  if (t < 0 || t >= chain.size() || chain.is_absorbing(t)) throw std::invalid_argument("t must be non-absorbing");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const bool use_part = mode != ReplacementMode::kReplacement;
  const bool use_replacement = mode != ReplacementMode::kPartOfRow;
  if (use_part) {
    if (!part) throw std::invalid_argument("mode needs a part of the transition");
    check_mass_within_row(chain, t, part->mass(), "part");
    const double importance = part->frequency * before.no_return_probability(t, part->row) / before.absorption_rate(t);
    if (importance < epsilon - 1e-12) throw std::invalid_argument("part importance " + fmt(importance) + " below epsilon");
  }
  if (use_replacement) {
    if (!replacement) throw std::invalid_argument("mode needs a replacement transition");
    if (replacement->size() != chain.size()) throw DimensionError("replacement has wrong length");
    const double g = before.no_return_probability(t, *replacement);
    if (g < epsilon - 1e-12) throw std::invalid_argument("replacement no-return probability " + fmt(g) + " below epsilon");
  }
  if (mode == ReplacementMode::kConvex && !(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda outside [0,1]");

  Eigen::VectorXd row;
  switch (mode) {
    case ReplacementMode::kPartOfRow: row = part->row; break;
    case ReplacementMode::kReplacement: row = *replacement; break;
    case ReplacementMode::kConvex: row = lambda * part->row + (1.0 - lambda) * *replacement; break;
  }
  ReplacementResult out;
  out.epsilon = epsilon;
  out.chain = chain.with_row(t, row);
  const ChainAnalysis after(out.chain);
  out.absorbing = after.is_absorbing();
  out.min_rate_ratio = kInf;
  for (StateId s : chain.non_absorbing_states()) {
    if (s == t) continue;
    const double old_rate = before.absorption_rate(s);
    if (old_rate > 0.0) out.min_rate_ratio = std::min(out.min_rate_ratio, after.absorption_rate(s) / old_rate);
  }
  if (out.min_rate_ratio == kInf) out.min_rate_ratio = 1.0;
  out.holds = out.absorbing && out.min_rate_ratio >= epsilon - kBoundSlack;
  return out;
}

// ---------------------------------------------------------------------------
// Polarization.

namespace {

struct MassStats {
  double frequency = 0.0;
  double importance = 0.0;
  double v = 0.0;
  double w = 0.0;
};

MassStats mass_statistics(const ChainAnalysis& analysis, StateId s, const Eigen::VectorXd& mass,
                          const Eigen::VectorXd& boundary, const Eigen::VectorXd& values) {
  MassStats out;
  out.frequency = mass.sum();
  if (!(out.frequency > 1e-15)) {
    out.v = out.w = values(s);
    return out;
  }
  const PartStatistics st = analysis.part_statistics(part_from_mass(s, mass), boundary, values);
  out.importance = st.importance;
  out.v = st.v;
  out.w = st.w;
  return out;
}

}  // namespace

PolarizationResult polarize(const Chain& chain, const Eigen::VectorXd& boundary1, const Eigen::VectorXd& boundary2,
                            const std::map<StateId, PolarizationParts>& parts, double epsilon, double delta,
                            double gamma) {
  const ChainAnalysis base(chain);
  const Eigen::VectorXd r1 = base.harmonic(boundary1);
  const Eigen::VectorXd r2 = base.harmonic(boundary2);
  const int n_states = static_cast<int>(chain.non_absorbing_states().size());
  PolarizationResult out;
  PolarizationReport& report = out.report;
  auto fail = [&report](const std::string& what) { report.hypothesis_failures.push_back(what); };

  if (!(0.0 < gamma && gamma < delta && delta < epsilon && epsilon < 0.5)) fail("need 1/2 > epsilon > delta > gamma > 0");
  if (n_states > 0) {
    const double log_limit = (3.0 * n_states + 1.0) * std::log(epsilon) - std::log(2.0 * n_states) -
                             n_states * std::log(3.0 * n_states);
    report.within_constants = std::log(delta) < log_limit;
  }
  if (r1.maxCoeff() - r1.minCoeff() > 1.0 + 1e-12 || r2.maxCoeff() - r2.minCoeff() > 1.0 + 1e-12) {
    fail("harmonic values spread by more than 1");
  }

  struct Plan {
    Eigen::VectorXd low;
    Eigen::VectorXd alternative;
    Eigen::VectorXd high;
    double w2_alternative = 0.0;
    double w2_high = 0.0;
  };
  std::map<StateId, Plan> candidates;
  std::map<StateId, Eigen::VectorXd> low_parts;
  const double n_delta_over_eps = n_states * delta / epsilon;
  for (const auto& [s, spec] : parts) {
    if (s < 0 || s >= chain.size() || chain.is_absorbing(s)) throw std::invalid_argument("polarization parts need non-absorbing hosts");
    const std::string& name = chain.name(s);
    if (!spec.low_part || !(spec.low_part->sum() > 0.0)) continue;
    const Eigen::VectorXd& low = *spec.low_part;
    check_mass_within_row(chain, s, low, "low part");
    low_parts[s] = low;
    const MassStats low_stats = mass_statistics(base, s, low, boundary2, r2);
    if (low_stats.w > r2(s) - epsilon + 1e-12) fail("w2(p*) above r2 - epsilon at " + name);
    if (low_stats.importance < gamma) continue;
    if (!spec.alternative || !spec.high_part) {
      fail("missing alternative or high part at " + name);
      continue;
    }
    Plan plan;
    plan.low = low;
    plan.alternative = *spec.alternative;
    plan.high = *spec.high_part;
    if (plan.alternative.size() != chain.size() || std::abs(plan.alternative.sum() - 1.0) > kStochasticTolerance) {
      throw std::invalid_argument("alternative at " + name + " is not a distribution");
    }
    check_mass_within_row(chain, s, plan.high, "high part");
    check_mass_within_row(chain, s, plan.high + plan.low, "high and low parts together");
    Part alternative;
    alternative.host = s;
    alternative.row = plan.alternative;
    const PartStatistics alt2 = base.part_statistics(alternative, boundary2, r2);
    const PartStatistics alt1 = base.part_statistics(alternative, boundary1, r1);
    plan.w2_alternative = alt2.w;
    if (alt2.w > r2(s) - epsilon + 1e-12) fail("w2(p) above r2 - epsilon at " + name);
    if (std::abs(alt1.v - r1(s)) > delta + 1e-12) fail("|v1(p) - r1| above delta at " + name);
    const Eigen::VectorXd rest = (chain.row(s) - plan.high - plan.low).cwiseMax(0.0);
    const MassStats rest2 = mass_statistics(base, s, rest, boundary2, r2);
    if ((rest2.v - r2(s)) * rest2.importance > n_delta_over_eps + 1e-12) fail("(v2(q^d) - r2) importance(q^d) above N delta/epsilon at " + name);
    plan.w2_high = mass_statistics(base, s, plan.high, boundary2, r2).w;
    if (plan.w2_high > r2(s)) candidates[s] = std::move(plan);
  }

  // Greedy selection in the chain with changes at T only.
  Chain current = chain;
  const double threshold = n_states > 0 ? epsilon * epsilon / (2.0 * n_states) : kInf;
  while (true) {
    const ChainAnalysis now(current);
    StateId best = -1;
    double best_nu = -1.0;
    for (const auto& [s, plan] : candidates) {
      if (contains(report.polarized, s)) continue;
      const double importance = plan.low.sum() * now.no_return_probability(s, normalized(plan.low)) /
                        std::max(now.absorption_rate(s), 1e-300);
      const double value = now.absorption_rate(s) > 0.0 ? importance : 0.0;
      if (value >= threshold && value > best_nu) {
        best = s;
        best_nu = value;
      }
    }
    if (best < 0) break;
    const Plan& plan = candidates.at(best);
    const double lambda = (plan.w2_high - r2(best)) / (plan.w2_high - plan.w2_alternative);
    report.polarized.push_back(best);
    report.lambda[best] = lambda;
    report.selection_importance[best] = best_nu;
    report.lambda_residual = std::max(
        report.lambda_residual, std::abs(lambda * plan.w2_alternative + (1.0 - lambda) * plan.w2_high - r2(best)));
    current = current.with_row(best, lambda * plan.alternative + (1.0 - lambda) * normalized(plan.high));
    report.high_part_v1_gap = std::max(
        report.high_part_v1_gap, std::abs(mass_statistics(base, best, plan.high, boundary1, r1).v - r1(best)));
  }
  {
    const ChainAnalysis mid(current);
    report.r2_drift_before_discard = (mid.expected_payoff(boundary2) - r2).cwiseAbs().maxCoeff();
  }

  for (const auto& [v, low] : low_parts) {
    if (contains(report.polarized, v)) continue;
    try {
      current = remove_mass(current, v, low);
    } catch (const std::invalid_argument&) {
      fail("p* is the whole transition at " + chain.name(v));
    }
  }
  out.chain = current;
  const ChainAnalysis final_analysis(current);
  report.absorbing = final_analysis.is_absorbing();
  report.deviation1 = (final_analysis.expected_payoff(boundary1) - r1).cwiseAbs().maxCoeff();
  report.deviation2 = (final_analysis.expected_payoff(boundary2) - r2).cwiseAbs().maxCoeff();
  report.hypotheses_hold = report.hypothesis_failures.empty();
  report.holds = report.absorbing && report.deviation1 <= epsilon + kBoundSlack && report.deviation2 <= epsilon + kBoundSlack &&
                 report.lambda_residual <= 1e-9;
  return out;
}

}  // namespace absorb_eq
