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

#include "absorb_eq/chain_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "linear_solve.hpp"

namespace absorb_eq {

namespace {

constexpr double kRateFloor = 1e-14;
constexpr double kCheckSlack = 1e-12;

std::vector<bool> as_mask(int n, const StateSet& set) {
  std::vector<bool> mask(n, false);
  for (StateId s : set) {
    if (s < 0 || s >= n) throw std::out_of_range("state index out of range");
    mask[s] = true;
  }
  return mask;
}

void check_state(const Chain& chain, StateId s) {
  if (s < 0 || s >= chain.size()) throw std::out_of_range("state index out of range");
}

}  // namespace

Eigen::VectorXd taboo_probabilities(const Chain& chain, const StateSet& taboo, const StateSet& target) {
  const int n = chain.size();
  const std::vector<bool> in_taboo = as_mask(n, taboo);
  const std::vector<bool> in_target = as_mask(n, target);
  std::vector<bool> fixed(n, false);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    if (in_taboo[v] && in_target[v]) throw std::invalid_argument("taboo and target sets overlap");
    fixed[v] = in_taboo[v] || in_target[v];
    if (in_target[v]) value(v) = 1.0;
  }
  // h(v): probability of entering the target before the taboo from v at
  // stage >= 0; one more step gives the stage >= 1 quantity.
  const Eigen::VectorXd h = detail::solve_fixed_boundary(chain.kernel(), fixed, value);
  return (chain.kernel() * h).cwiseMax(0.0).cwiseMin(1.0);
}

double taboo_probability(const Chain& chain, StateId s, const StateSet& taboo, const StateSet& target) {
  check_state(chain, s);
  return taboo_probabilities(chain, taboo, target)(s);
}

StateSet trapped_class(const Chain& chain) {
  const int n = chain.size();
  const std::vector<bool> none(n, false);
  std::vector<std::vector<bool>> reach(n);
  for (int s = 0; s < n; ++s) reach[s] = detail::reachable_from(chain.kernel(), s, none);
  for (int s = 0; s < n; ++s) {
    if (chain.is_absorbing(s)) continue;
    bool closed = true;
    for (int t = 0; t < n && closed; ++t) {
      if (reach[s][t] && !reach[t][s]) closed = false;
    }
    if (!closed) continue;
    StateSet cls;
    for (int t = 0; t < n; ++t) {
      if (reach[s][t]) cls.push_back(t);
    }
    return cls;
  }
  return {};
}

bool is_absorbing_chain(const Chain& chain) { return trapped_class(chain).empty(); }

ChainAnalysis::ChainAnalysis(Chain chain) : chain_(std::move(chain)) {
  const int n = chain_.size();
  hit_.resize(n, n);
  for (int s = 0; s < n; ++s) {
    std::vector<bool> fixed(n, false);
    fixed[s] = true;
    Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
    value(s) = 1.0;
    hit_.col(s) = detail::solve_fixed_boundary(chain_.kernel(), fixed, value).cwiseMax(0.0).cwiseMin(1.0);
  }
  trapped_ = trapped_class(chain_);
}

double ChainAnalysis::esc(StateId t, StateId s) const {
  check_state(chain_, s);
  check_state(chain_, t);
  if (s == t) throw std::invalid_argument("esc needs two distinct states");
  return 1.0 - hit_(t, s);
}

double ChainAnalysis::metric(StateId s, StateId t) const {
  if (s == t) return 0.0;
  return esc(s, t) + esc(t, s);
}

double ChainAnalysis::return_probability(StateId s) const {
  check_state(chain_, s);
  return std::clamp(chain_.kernel().row(s).dot(hit_.col(s)), 0.0, 1.0);
}

double ChainAnalysis::absorption_rate(StateId s) const { return 1.0 - return_probability(s); }

double ChainAnalysis::expected_visits(StateId s) const {
  const double a = absorption_rate(s);
  return a > kRateFloor ? 1.0 / a : kInfiniteVisits;
}

Eigen::VectorXd ChainAnalysis::expected_payoff(const Eigen::VectorXd& boundary) const {
  if (boundary.size() != size()) throw DimensionError("boundary has wrong length");
  return detail::solve_fixed_boundary(chain_.kernel(), chain_.absorbing_flags(), boundary);
}

Eigen::VectorXd ChainAnalysis::harmonic(const Eigen::VectorXd& boundary) const {
  if (!trapped_.empty()) {
    std::ostringstream what;
    what << "chain is not absorbing; trapped class:";
    for (StateId s : trapped_) what << ' ' << chain_.name(s);
    throw NonAbsorbingChainError(what.str(), trapped_);
  }
  return expected_payoff(boundary);
}

Eigen::VectorXd ChainAnalysis::no_return_value(StateId s, const Eigen::VectorXd& boundary) const {
  check_state(chain_, s);
  if (boundary.size() != size()) throw DimensionError("boundary has wrong length");
  std::vector<bool> fixed = chain_.absorbing_flags();
  Eigen::VectorXd value = boundary;
  fixed[s] = true;
  value(s) = 0.0;
  return detail::solve_fixed_boundary(chain_.kernel(), fixed, value);
}

double ChainAnalysis::no_return_probability(StateId s, const Eigen::VectorXd& row) const {
  check_state(chain_, s);
  if (row.size() != size()) throw DimensionError("row has wrong length");
  double g = 0.0;
  for (int t = 0; t < size(); ++t) {
    if (t != s) g += row(t) * (1.0 - hit_(t, s));
  }
  return std::clamp(g, 0.0, 1.0);
}

PartStatistics ChainAnalysis::part_statistics(const Part& part, const Eigen::VectorXd& boundary,
                                              const Eigen::VectorXd& values) const {
  const StateId s = part.host;
  check_state(chain_, s);
  if (values.size() != size()) throw DimensionError("values have wrong length");
  PartStatistics st;
  st.frequency = part.frequency;
  st.g = no_return_probability(s, part.row);
  if (st.g > 0.0) {
    const Eigen::VectorXd u = no_return_value(s, boundary);
    double num = 0.0;
    for (int t = 0; t < size(); ++t) {
      if (t != s) num += part.row(t) * u(t);
    }
    st.v = num / st.g;
  } else {
    st.v = values(s);
  }
  st.w = st.g * st.v + (1.0 - st.g) * values(s);
  const double a = absorption_rate(s);
  if (a > kRateFloor) {
    st.importance = st.frequency * st.g / a;
  } else {
    st.importance = 0.0;
    st.importance_undefined = true;
  }
  return st;
}

PartStatistics ChainAnalysis::part_statistics(const Part& part, const Eigen::VectorXd& boundary) const {
  return part_statistics(part, boundary, expected_payoff(boundary));
}

Eigen::MatrixXd ChainAnalysis::visit_matrix() const {
  if (!trapped_.empty()) throw NonAbsorbingChainError("visit counts are infinite in a non-absorbing chain", trapped_);
  const std::vector<int> transient = chain_.non_absorbing_states();
  const int m = static_cast<int>(transient.size());
  const Eigen::MatrixXd local =
      detail::solve_transient(chain_.kernel(), transient, Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) out(transient[i], transient[j]) = local(i, j);
  }
  return out;
}

double taboo_probability(const ChainAnalysis& analysis, StateId s, const StateSet& taboo, const StateSet& target) {
  return taboo_probability(analysis.chain(), s, taboo, target);
}

double escape_probability(const ChainAnalysis& analysis, StateId t, StateId s) { return analysis.esc(t, s); }

double chain_metric(const ChainAnalysis& analysis, StateId s, StateId t) { return analysis.metric(s, t); }

double absorption_rate(const ChainAnalysis& analysis, StateId s) { return analysis.absorption_rate(s); }

PartStatistics part_statistics(const ChainAnalysis& analysis, const Part& part, const Eigen::VectorXd& boundary) {
  return analysis.part_statistics(part, boundary);
}

Eigen::VectorXd harmonic_payoffs(const Chain& chain, const Eigen::VectorXd& boundary) {
  return ChainAnalysis(chain).harmonic(boundary);
}

double factor_distance(double x, double y) {
  if (x == 0.0 && y == 0.0) return 0.0;
  if (x <= 0.0 || y <= 0.0) return 1.0;
  return std::max({0.0, 1.0 - y / x, 1.0 - x / y});
}

IdentityReport check_taboo_identities(const ChainAnalysis& analysis) {
  const Chain& chain = analysis.chain();
  const int n = chain.size();
  const StateSet absorbing = chain.absorbing_states();
  const StateSet transient = chain.non_absorbing_states();
  IdentityReport report;
  for (StateId s : transient) {
    const double a_s = analysis.absorption_rate(s);
    for (StateId t : transient) {
      if (s == t) continue;
      ++report.pairs;
      const double to_t = taboo_probability(chain, s, {s}, {t});           // P^s(s,t)
      const double out = taboo_probability(chain, s, {s, t}, absorbing);    // P^{s,t}(s,A)
      StateSet block = absorbing;
      block.push_back(t);
      const double back = taboo_probability(chain, s, block, {s});          // P^{A u t}(s,s)
      const double esc_st = analysis.esc(s, t);
      const double esc_ts = analysis.esc(t, s);
      const double metric = analysis.metric(s, t);
      if (to_t + out > kRateFloor) report.escape_identity = std::max(report.escape_identity, std::abs(esc_st - out / (to_t + out)));
      if (1.0 - back > kRateFloor) report.escape_identity_alt = std::max(report.escape_identity_alt, std::abs(esc_st - out / (1.0 - back)));
      report.rate_identity = std::max(report.rate_identity, std::abs(a_s - to_t * esc_ts - out));
      report.escape_bounds = std::max({report.escape_bounds, to_t * metric - a_s, a_s - metric,
                                analysis.absorption_rate(t) * to_t - a_s});
      report.metric = std::max(report.metric, std::abs(metric - analysis.metric(t, s)));
    }
    report.metric = std::max(report.metric, std::abs(analysis.metric(s, s)));
  }
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      for (int w = 0; w < n; ++w) {
        if (w == u || w == v) continue;
        const double lhs = 1.0 - analysis.esc(u, w);
        const double rhs = (1.0 - analysis.esc(u, v)) * (1.0 - analysis.esc(v, w));
        report.composition = std::max(report.composition, rhs - lhs);
      }
    }
  }
  return report;
}

ReplacementBoundReport replacement_value_bound(const Chain& chain, const std::map<StateId, Eigen::VectorXd>& replacements,
                            const Eigen::VectorXd& boundary, const std::map<StateId, double>& delta,
                            const std::map<StateId, double>& epsilon) {
  const ChainAnalysis before(chain);
  ReplacementBoundReport report;
  report.old_values = before.harmonic(boundary);

  Chain replaced = chain;
  std::map<StateId, double> v_new;
  for (const auto& [s, row] : replacements) {
    check_state(chain, s);
    if (chain.is_absorbing(s)) throw std::invalid_argument("cannot replace the transition of an absorbing state");
    Part part;
    part.host = s;
    part.row = row;
    const PartStatistics st = before.part_statistics(part, boundary, report.old_values);
    if (!(st.g > 0.0)) {
      throw std::invalid_argument("replacement at " + chain.name(s) + " has zero no-return probability");
    }
    report.g[s] = st.g;
    v_new[s] = st.v;
    replaced = replaced.with_row(s, row);
  }

  const ChainAnalysis after(replaced);
  report.new_chain_absorbing = after.is_absorbing();
  report.new_values = after.expected_payoff(boundary);
  for (const auto& [s, row] : replacements) {
    const double rate = after.absorption_rate(s);
    report.new_rate[s] = rate;
    const double gap = std::abs(v_new[s] - report.old_values(s));
    const auto d_it = delta.find(s);
    const auto e_it = epsilon.find(s);
    const double d = d_it != delta.end() ? d_it->second : gap;
    const double e = e_it != epsilon.end() ? e_it->second : std::min(1.0, rate / report.g[s]);
    report.delta[s] = d;
    report.epsilon[s] = e;
    const std::string& name = chain.name(s);
    if (d + kCheckSlack < gap) report.hypothesis_failures.push_back("delta too small at " + name);
    if (rate + kCheckSlack < e * report.g[s]) report.hypothesis_failures.push_back("absorption rate below epsilon g at " + name);
    if (!(e > 0.0) || e > 1.0) report.hypothesis_failures.push_back("epsilon outside (0,1] at " + name);
    report.bound += e > 0.0 ? d / e : kInfiniteVisits;
  }
  report.hypotheses_hold = report.hypothesis_failures.empty();
  report.max_deviation = (report.new_values - report.old_values).cwiseAbs().maxCoeff();
  report.holds = report.new_chain_absorbing && report.max_deviation <= report.bound + 1e-9;
  return report;
}

VisitRatioReport visit_ratio_check(const ChainAnalysis& analysis, StateId s, StateId t) {
  const Chain& chain = analysis.chain();
  check_state(chain, s);
  check_state(chain, t);
  if (s == t || chain.is_absorbing(s) || chain.is_absorbing(t)) {
    throw std::invalid_argument("the visit-ratio check needs two distinct non-absorbing states");
  }
  VisitRatioReport report;
  report.gamma = analysis.esc(t, s);
  if (!(report.gamma < 1.0)) throw std::invalid_argument("the visit-ratio check needs esc(t,s) < 1");
  const double t_to_s = taboo_probability(chain, t, {t}, {s});
  const double s_to_t = taboo_probability(chain, s, {s}, {t});
  report.first_ratio_excess =
      factor_distance(t_to_s * analysis.metric(s, t), analysis.absorption_rate(t)) - 2.0 * report.gamma;

  if (s_to_t > 0.0 && analysis.is_absorbing()) {
    report.visits_applicable = true;
    const double target = (1.0 - 4.0 * report.gamma) * t_to_s / s_to_t;
    const Eigen::MatrixXd visits = analysis.visit_matrix();
    const StateId starts[2] = {s, t};
    double* excess[2] = {&report.visits_excess_from_s, &report.visits_excess_from_t};
    for (int k = 0; k < 2; ++k) {
      const double to_t = visits(starts[k], t);
      *excess[k] = to_t > 0.0 ? target - visits(starts[k], s) / to_t : -kInfiniteVisits;
    }
  }
  report.holds = report.first_ratio_excess <= 1e-9 &&
                 (!report.visits_applicable ||
                  (report.visits_excess_from_s <= 1e-9 && report.visits_excess_from_t <= 1e-9));
  return report;
}

}  // namespace absorb_eq
