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

#include "absorb_eq/aux_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace absorb_eq {

namespace {

constexpr long kChunkRuns = 10000;
constexpr double kZ99 = 2.5758293035489004;

}  // namespace

double AuxParams::log_l() const { return std::log(q1) + std::log(q2); }

double AuxParams::log_k() const { return num_states * log_l(); }

AuxParams make_aux_params(double epsilon_bar, double delta, double q1, double q2, int num_states) {
  if (!(epsilon_bar > 0.0 && epsilon_bar < 1.0)) throw std::invalid_argument("epsilon_bar must lie in (0,1)");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be non-negative");
  if (!(q1 > 1.0 && q2 > 1.0)) throw std::invalid_argument("Q1 and Q2 must exceed 1");
  if (num_states < 0) throw std::invalid_argument("negative state count");
  AuxParams p;
  p.epsilon_bar = epsilon_bar;
  p.delta = delta;
  p.q1 = q1;
  p.q2 = q2;
  p.num_states = num_states;
  return p;
}

AuxEvaluation aux_quantities(const GameSpec& game, const StrategyProfile& profile, const AuxParams& params) {
  const Chain chain = induce_chain(game, profile);
  const ChainAnalysis analysis(chain);
  const Eigen::VectorXd boundary = game.payoff2();
  const int n = game.num_states();
  AuxEvaluation out;
  out.params = params;
  out.r2 = analysis.harmonic(boundary);
  out.a = Eigen::VectorXd::Ones(n);
  out.aux_rate = Eigen::VectorXd::Ones(n);
  out.order_weight = Eigen::VectorXd::Ones(n);
  out.aux_value = out.r2;
  out.aux_value_max = out.r2;
  out.moves.resize(n);
  for (StateId s : game.non_absorbing_states()) {
    const Eigen::VectorXd u = analysis.no_return_value(s, boundary);
    const double r = out.r2(s);
    out.a(s) = analysis.absorption_rate(s);
    double aux_rate = 0.0;
    for (int b = 0; b < game.state(s).num_p2(); ++b) {
      MoveEvaluation m;
      m.move = b;
      m.frequency = profile.y[s](b);
      const Eigen::VectorXd row = mixed_row_p2_move(game, s, profile.x[s], b);
      m.g = analysis.no_return_probability(s, row);
      if (m.g > 0.0) {
        double num = 0.0;
        for (int t = 0; t < n; ++t) {
          if (t != s) num += row(t) * u(t);
        }
        m.v2 = num / m.g;
      } else {
        m.v2 = r;
      }
      m.scaled_escape = m.g >= params.epsilon_bar ? 1.0 : m.g / params.epsilon_bar;
      m.scaled_value2 = m.scaled_escape > 0.0 ? (1.0 - m.g / m.scaled_escape) * r + (m.g / m.scaled_escape) * m.v2 : r;
      m.escape_factor = m.scaled_escape >= 1.0 ? 1.0 : 1.0 - (1.0 - m.scaled_escape) / (1.0 - m.g);
      out.identity_residual = std::max(
          out.identity_residual, std::abs(m.g * m.v2 + (1.0 - m.g) * m.escape_factor * r - m.scaled_escape * m.scaled_value2));
      aux_rate += m.frequency * m.scaled_escape;
      out.moves[s].push_back(m);
    }
    out.aux_rate(s) = aux_rate;
  }
  return out;
}

Eigen::VectorXd ordering_weights(const Eigen::VectorXd& aux_rate, const AuxParams& params) {
  const int m = static_cast<int>(aux_rate.size());
  for (int i = 0; i < m; ++i) {
    if (!(aux_rate(i) > 0.0)) throw std::invalid_argument("auxiliary absorption rate is zero at position " + std::to_string(i));
  }
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&aux_rate](int i, int j) { return aux_rate(i) < aux_rate(j); });
  const double log_k = params.log_k();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
  double log_w = 0.0;
  for (int k = m - 2; k >= 0; --k) {
    log_w += std::min(std::log(aux_rate(order[k + 1]) / aux_rate(order[k])), log_k);
    w(order[k]) = std::exp(log_w);
  }
  return w;
}

double auxiliary_closed_form(double r2, double order_weight, double aux_rate, double delta) {
  const double wa = order_weight * aux_rate;
  return r2 * wa / (wa + delta * (1.0 - aux_rate));
}

AuxEvaluation auxiliary_values(const GameSpec& game, const StrategyProfile& profile, const AuxParams& params) {
  AuxEvaluation out = aux_quantities(game, profile, params);
  const std::vector<StateId> live = game.non_absorbing_states();
  Eigen::VectorXd rates(live.size());
  for (size_t i = 0; i < live.size(); ++i) {
    rates(i) = out.aux_rate(live[i]);
    if (!(rates(i) > 0.0)) throw std::invalid_argument("auxiliary absorption rate is zero at " + game.state(live[i]).name);
  }
  const Eigen::VectorXd w = ordering_weights(rates, params);
  const double delta = params.delta;
  for (size_t i = 0; i < live.size(); ++i) {
    const StateId s = live[i];
    out.order_weight(s) = w(i);
    const double aux_value = auxiliary_closed_form(out.r2(s), w(i), out.aux_rate(s), delta);
    out.aux_value(s) = aux_value;
    double mixed = 0.0, best = -std::numeric_limits<double>::infinity();
    for (MoveEvaluation& m : out.moves[s]) {
      m.aux_value = m.scaled_escape * m.scaled_value2 + (1.0 - delta / w(i)) * (1.0 - m.scaled_escape) * aux_value;
      mixed += m.frequency * m.aux_value;
      best = std::max(best, m.aux_value);
    }
    out.aux_value_max(s) = best;
    out.consistency_residual = std::max(out.consistency_residual, std::abs(mixed - aux_value));
    const double rebuilt = aux_value * (1.0 + delta * (1.0 - out.aux_rate(s)) / (w(i) * out.aux_rate(s)));
    out.r2_residual = std::max(out.r2_residual, std::abs(rebuilt - out.r2(s)));
  }
  return out;
}

namespace {

// Cumulative tables for fast sampling.
struct Sampler {
  std::vector<std::vector<double>> x_cum, y_cum;
  std::vector<std::vector<std::vector<double>>> row_cum;  // [state][pair]

  Sampler(const GameSpec& game, const StrategyProfile& profile) {
    const int n = game.num_states();
    x_cum.resize(n);
    y_cum.resize(n);
    row_cum.resize(n);
    auto cumulate = [](const Eigen::VectorXd& v) {
      std::vector<double> c(v.size());
      double total = 0.0;
      for (int i = 0; i < v.size(); ++i) c[i] = total += v(i);
      return c;
    };
    for (int s = 0; s < n; ++s) {
      x_cum[s] = cumulate(profile.x[s]);
      y_cum[s] = cumulate(profile.y[s]);
      for (const Eigen::VectorXd& row : game.state(s).rows) row_cum[s].push_back(cumulate(row));
    }
  }

  static int draw(const std::vector<double>& cum, double u) {
    const double scaled = u * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), scaled);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
  }
};

}  // namespace

SimulationTrace simulate_trace(const GameSpec& game, const StrategyProfile& profile, StateId start, int first_move,
                               std::mt19937_64& rng, int horizon) {
  check_profile(game, profile);
  const Sampler sampler(game, profile);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SimulationTrace trace;
  trace.visit_stages.resize(game.num_states());
  StateId s = start;
  for (int stage = 0; stage < horizon; ++stage) {
    trace.visit_stages[s].push_back(stage);
    if (game.is_absorbing(s)) {
      trace.absorbed = true;
      trace.payoff2 = game.state(s).r2;
      break;
    }
    const StateSpec& st = game.state(s);
    const int a = Sampler::draw(sampler.x_cum[s], unit(rng));
    const int b = stage == 0 && first_move >= 0 ? first_move : Sampler::draw(sampler.y_cum[s], unit(rng));
    trace.steps.push_back({s, a, b});
    s = Sampler::draw(sampler.row_cum[s][a * st.num_p2() + b], unit(rng));
  }
  trace.final_state = s;
  return trace;
}

int certified_horizon(const GameSpec& game, const StrategyProfile& profile, double tail) {
  const ChainAnalysis analysis(induce_chain(game, profile));
  const double expected_time = analysis.visit_matrix().rowwise().sum().maxCoeff();
  return static_cast<int>(std::ceil(std::max(1.0, expected_time / tail)));
}

MonteCarloEstimate auxiliary_monte_carlo(const GameSpec& game, const StrategyProfile& profile, const AuxEvaluation& eval,
                                  StateId s, int move, long runs, std::uint64_t seed, int horizon) {
  check_profile(game, profile);
  if (game.is_absorbing(s)) throw std::invalid_argument("aux_value is simulated at non-absorbing states only");
  if (move >= game.state(s).num_p2()) throw std::out_of_range("move out of range");
  MonteCarloEstimate out;
  out.horizon = horizon > 0 ? horizon : certified_horizon(game, profile, 1e-4);
  const Sampler sampler(game, profile);
  std::vector<double> escape_factor;
  for (const MoveEvaluation& m : eval.moves[s]) escape_factor.push_back(m.escape_factor);
  const double keep = 1.0 - eval.params.delta / eval.order_weight(s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  for (long chunk = 0; chunk * kChunkRuns < runs; ++chunk) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(chunk)};
    std::mt19937_64 rng(seq);
    const long count = std::min(kChunkRuns, runs - chunk * kChunkRuns);
    for (long run = 0; run < count; ++run) {
      StateId state = s;
      double bracket = 0.0;
      double carried = 1.0;  // d^{i-1} prod_{k<i} (1 - escape_factor)
      int last_move = -1;
      bool absorbed = false;
      for (int stage = 0; stage < out.horizon; ++stage) {
        if (game.is_absorbing(state)) {
          absorbed = true;
          break;
        }
        const StateSpec& st = game.state(state);
        const int a = Sampler::draw(sampler.x_cum[state], unit(rng));
        const int b = stage == 0 && move >= 0 ? move : Sampler::draw(sampler.y_cum[state], unit(rng));
        if (state == s) {
          if (last_move >= 0) {
            bracket += escape_factor[last_move] * carried;
            carried *= keep * (1.0 - escape_factor[last_move]);
          }
          last_move = b;
        }
        state = Sampler::draw(sampler.row_cum[state][a * st.num_p2() + b], unit(rng));
      }
      double sample = 0.0;
      if (absorbed) {
        sample = game.state(state).r2 * (bracket + carried);
      } else {
        ++out.truncated;
      }
      sum += sample;
      sum_sq += sample * sample;
    }
  }
  out.runs = runs;
  out.estimate = sum / runs;
  const double variance = runs > 1 ? std::max(0.0, (sum_sq - runs * out.estimate * out.estimate) / (runs - 1)) : 0.0;
  out.halfwidth = kZ99 * std::sqrt(variance / runs);
  return out;
}

AuxMonotonicityReport auxiliary_monotonicity_check(const AuxEvaluation& eval, StateId s, StateId t, double gamma) {
  AuxMonotonicityReport report;
  const double slack = 1e-12;
  const double wa_s = eval.order_weight(s) * eval.aux_rate(s);
  const double wa_t = eval.order_weight(t) * eval.aux_rate(t);
  report.rate_premise = std::log(eval.aux_rate(t)) <= std::log(eval.aux_rate(s)) + eval.params.log_k();
  if (report.rate_premise) report.rate_holds = wa_t <= wa_s * (1.0 + slack);
  report.value_premise = wa_s <= wa_t * (1.0 + slack) && eval.r2(s) <= eval.r2(t) + gamma;
  if (report.value_premise) report.value_holds = eval.aux_value(s) <= eval.aux_value(t) + gamma + eval.params.delta + slack;
  return report;
}

}  // namespace absorb_eq
