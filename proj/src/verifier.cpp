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

#include "absorb_eq/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <tuple>

#include "absorb_eq/chain_engine.hpp"
#include "linear_solve.hpp"

namespace absorb_eq {

namespace {

constexpr double kZ99 = 2.5758293035489;
constexpr long kChunk = 10000;

// Draws from a fixed distribution by scanning its support.
class Sampler {
 public:
  Sampler() = default;
  explicit Sampler(const Eigen::VectorXd& p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) <= 0.0) continue;
      acc += p(i);
      index_.push_back(static_cast<int>(i));
      cumulative_.push_back(acc);
    }
  }
  int operator()(double u) const {
    const double target = u * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    return index_[std::min<size_t>(it - cumulative_.begin(), index_.size() - 1)];
  }

 private:
  std::vector<int> index_;
  std::vector<double> cumulative_;
};

// One-player problem of the deviating player against a frozen opponent.
struct DeviationProblem {
  int n = 0;
  std::vector<bool> absorbing;
  Eigen::VectorXd terminal;
  std::vector<std::vector<Eigen::VectorXd>> rows;  // per state, per move of the deviator
};

DeviationProblem deviation_problem(const GameSpec& game, const StrategyProfile& profile, int player) {
  check_profile(game, profile);
  if (player != 1 && player != 2) throw std::invalid_argument("player must be 1 or 2");
  DeviationProblem p;
  p.n = game.num_states();
  p.terminal = player == 1 ? game.payoff1() : game.payoff2();
  p.rows.resize(p.n);
  for (StateId s = 0; s < p.n; ++s) {
    const StateSpec& st = game.state(s);
    p.absorbing.push_back(st.absorbing);
    const int moves = player == 1 ? st.num_p1() : st.num_p2();
    for (int c = 0; c < moves; ++c) {
      p.rows[s].push_back(player == 1 ? mixed_row_p1_move(game, s, c, profile.y[s])
                                      : mixed_row_p2_move(game, s, profile.x[s], c));
    }
  }
  return p;
}

// Non-absorbing states from which some policy avoids absorption forever.
std::vector<bool> avoidable(const DeviationProblem& p) {
  std::vector<bool> in(p.n);
  for (int s = 0; s < p.n; ++s) in[s] = !p.absorbing[s];
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < p.n; ++s) {
      if (!in[s]) continue;
      bool some = false;
      for (const Eigen::VectorXd& row : p.rows[s]) {
        bool inside = true;
        for (int t = 0; t < p.n && inside; ++t) inside = row(t) <= 0.0 || in[t];
        some = some || inside;
      }
      if (!some) {
        in[s] = false;
        changed = true;
      }
    }
  }
  return in;
}

}  // namespace

BestResponse best_response_value(const GameSpec& game, const StrategyProfile& profile, int player,
                                 DeviationMode mode, double alpha) {
  const DeviationProblem p = deviation_problem(game, profile, player);
  const bool discounted = mode == DeviationMode::kDiscounted;
  if (discounted && !(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  const double beta = discounted ? 1.0 - alpha : 1.0;
  const int n = p.n;

  // Undiscounted: the option of never absorbing is a halting state worth
  // 0, and payoffs are shifted to be non-negative so that the optimum is
  // the least solution above zero.
  std::vector<bool> can_halt(n, false);
  double shift = 0.0;
  if (!discounted) {
    can_halt = avoidable(p);
    for (int s = 0; s < n; ++s) {
      if (p.absorbing[s]) shift = std::max(shift, -p.terminal(s));
    }
  }
  const int halt = n;
  const int size = n + 1;
  std::vector<bool> fixed(size, true);
  Eigen::VectorXd fixed_value = Eigen::VectorXd::Zero(size);
  for (int s = 0; s < n; ++s) {
    fixed[s] = p.absorbing[s];
    if (p.absorbing[s]) fixed_value(s) = p.terminal(s) + shift;
  }
  fixed_value(halt) = shift;

  auto option_value = [&](int s, int c, const Eigen::VectorXd& v) {
    if (c == kNeverAbsorb) return shift;
    return beta * p.rows[s][c].dot(v.head(n));
  };
  auto best_option = [&](int s, const Eigen::VectorXd& v, int& arg) {
    double best = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(p.rows[s].size()); ++c) {
      const double val = option_value(s, c, v);
      if (val > best + 1e-13) {
        best = val;
        arg = c;
      }
    }
    if (can_halt[s] && shift > best + 1e-13) {
      best = shift;
      arg = kNeverAbsorb;
    }
    return best;
  };

  // Value iteration warm start.
  Eigen::VectorXd v = fixed_value;
  for (int s = 0; s < n; ++s) {
    if (!p.absorbing[s]) v(s) = 0.0;
  }
  std::vector<int> policy(n, 0);
  for (int sweep = 0; sweep < 2000; ++sweep) {
    double change = 0.0;
    Eigen::VectorXd next = v;
    for (int s = 0; s < n; ++s) {
      if (p.absorbing[s]) continue;
      next(s) = best_option(s, v, policy[s]);
      change = std::max(change, std::abs(next(s) - v(s)));
    }
    v = next;
    if (change <= 1e-14) break;
  }

  auto evaluate = [&](const std::vector<int>& pol) {
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(size, size);
    for (int s = 0; s < n; ++s) {
      if (p.absorbing[s]) {
        kernel(s, s) = 1.0;
      } else if (pol[s] == kNeverAbsorb) {
        kernel(s, halt) = 1.0;
      } else {
        kernel.row(s).head(n) = beta * p.rows[s][pol[s]].transpose();
      }
    }
    kernel(halt, halt) = 1.0;
    return detail::solve_fixed_boundary(kernel, fixed, fixed_value);
  };

  BestResponse out;
  out.player = player;
  out.mode = mode;
  out.alpha = discounted ? alpha : 0.0;
  v = evaluate(policy);
  for (int round = 0; round < 1000; ++round) {
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      if (p.absorbing[s]) continue;
      int arg = policy[s];
      const double best = best_option(s, v, arg);
      if (best > v(s) + 1e-12 * (1.0 + std::abs(v(s))) && arg != policy[s]) {
        policy[s] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    ++out.improvements;
    v = evaluate(policy);
  }

  out.values = v.head(n).array() - shift;
  out.policy = policy;
  for (int s = 0; s < n; ++s) {
    if (p.absorbing[s]) {
      out.values(s) = p.terminal(s);
      out.policy[s] = 0;
      continue;
    }
    int arg = 0;
    out.bellman_residual = std::max(out.bellman_residual, std::abs(best_option(s, v, arg) - v(s)));
    out.never_absorbs = out.never_absorbs || policy[s] == kNeverAbsorb;
  }
  return out;
}

int absorption_horizon(const GameSpec& game, const StrategyProfile& profile, StateId start, double tail,
                       int max_stages) {
  const Chain chain = induce_chain(game, profile);
  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(chain.size());
  dist(start) = 1.0;
  for (int stage = 0; stage <= max_stages; ++stage) {
    double running = 0.0;
    for (int s = 0; s < chain.size(); ++s) {
      if (!chain.is_absorbing(s)) running += dist(s);
    }
    if (running < tail) return stage;
    dist = dist * chain.kernel();
  }
  throw std::runtime_error("play not absorbed within the stage limit");
}

// ---------------------------------------------------------------------------

namespace {

Certificate certify(const GameSpec& game, const StrategyProfile& profile, double epsilon, const Eigen::VectorXd& c1,
                    const Eigen::VectorXd& c2, int n) {
  const int size = game.num_states();
  if (c1.size() != size || c2.size() != size) {
    throw std::invalid_argument("certificate needs undiscounted punishment values for both players");
  }
  const ChainAnalysis analysis(induce_chain(game, profile));
  Certificate cert;
  cert.epsilon = epsilon;
  cert.n = n > 0 ? n : size;
  cert.delta_budget = epsilon * epsilon * epsilon / (cert.n * cert.m);
  cert.epsilon_in_range = epsilon > 0.0 && epsilon < 0.5;
  cert.r1 = analysis.harmonic(game.payoff1());
  cert.r2 = analysis.harmonic(game.payoff2());
  cert.j1 = cert.r1;
  cert.j2 = cert.r2;

  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    double best1 = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < st.num_p1(); ++a) {
      const Eigen::VectorXd row = mixed_row_p1_move(game, s, a, profile.y[s]);
      best1 = std::max(best1, row.dot(c1));
      if (profile.x[s](a) > 0.0) {
        const double dev = std::abs(row.dot(cert.r1) - cert.r1(s));
        cert.delta_used = std::max(cert.delta_used, dev);
        cert.move_margins.push_back({1, s, a, dev, cert.delta_budget - dev});
      }
    }
    double best2 = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < st.num_p2(); ++b) {
      const Eigen::VectorXd row = mixed_row_p2_move(game, s, profile.x[s], b);
      best2 = std::max(best2, row.dot(c2));
      if (profile.y[s](b) > 0.0) {
        const double dev = std::abs(row.dot(cert.r2) - cert.r2(s));
        cert.delta_used = std::max(cert.delta_used, dev);
        cert.move_margins.push_back({2, s, b, dev, cert.delta_budget - dev});
      }
    }
    cert.j1(s) = best1;
    cert.j2(s) = best2;
    cert.payoff_margins.push_back({1, s, -1, cert.r1(s), cert.r1(s) - (best1 - epsilon)});
    cert.payoff_margins.push_back({2, s, -1, cert.r2(s), cert.r2(s) - (best2 - epsilon)});
  }
  for (const auto* list : {&cert.payoff_margins, &cert.move_margins}) {
    for (const CertificateMargin& m : *list) {
      if (m.margin < 0.0) cert.witnesses.push_back(m);
    }
  }
  cert.certified = cert.epsilon_in_range && cert.witnesses.empty();
  return cert;
}

}  // namespace

Certificate certify_profile(const GameSpec& game, const StrategyProfile& profile, double epsilon,
                              const ZeroSumTables& tables, int n) {
  return certify(game, profile, epsilon, tables.c1, tables.c2, n);
}

Certificate certify_situations(const GameSpec& situations, const std::vector<StateId>& base,
                              const StrategyProfile& profile, double epsilon, const ZeroSumTables& original_tables) {
  const int size = situations.num_states();
  if (static_cast<int>(base.size()) != size) throw DimensionError("one base state per situation required");
  Eigen::VectorXd c1(size), c2(size);
  for (int u = 0; u < size; ++u) {
    if (base[u] < 0 || base[u] >= original_tables.c1.size() || base[u] >= original_tables.c2.size()) {
      throw std::invalid_argument("base state outside the original game");
    }
    c1(u) = original_tables.c1(base[u]);
    c2(u) = original_tables.c2(base[u]);
  }
  return certify(situations, profile, epsilon, c1, c2, size);
}

// ---------------------------------------------------------------------------

std::pair<double, double> wilson_interval(long successes, long trials) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = successes / n;
  const double z2 = kZ99 * kZ99;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = kZ99 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

SimulationReport simulate_test_and_punish(const GameSpec& game, const StrategyProfile& profile, double epsilon,
                                          StateId start, long runs, std::uint64_t seed, bool keep_records) {
  const ChainAnalysis analysis(induce_chain(game, profile));
  const Eigen::VectorXd r1 = analysis.harmonic(game.payoff1());
  const Eigen::VectorXd r2 = analysis.harmonic(game.payoff2());
  const int n = game.num_states();
  std::vector<Eigen::VectorXd> inc1(n), inc2(n);
  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    inc1[s].resize(st.num_p1());
    inc2[s].resize(st.num_p2());
    for (int a = 0; a < st.num_p1(); ++a) inc1[s](a) = mixed_row_p1_move(game, s, a, profile.y[s]).dot(r1) - r1(s);
    for (int b = 0; b < st.num_p2(); ++b) inc2[s](b) = mixed_row_p2_move(game, s, profile.x[s], b).dot(r2) - r2(s);
  }

  std::vector<Sampler> draw_a(n), draw_b(n);
  std::vector<std::vector<Sampler>> draw_next(n);
  for (StateId s : game.non_absorbing_states()) {
    draw_a[s] = Sampler(profile.x[s]);
    draw_b[s] = Sampler(profile.y[s]);
    for (const Eigen::VectorXd& row : game.state(s).rows) draw_next[s].emplace_back(row);
  }

  SimulationReport rep;
  rep.start = start;
  rep.runs = runs;
  rep.epsilon = epsilon;
  rep.horizon = absorption_horizon(game, profile, start, epsilon / 10.0);
  long punished = 0, expired = 0, absorbed = 0;
  double absorption_stages = 0.0, max_stat = 0.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (long chunk = 0; chunk * kChunk < runs; ++chunk) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(chunk)};
    std::mt19937_64 rng(seq);
    const long count = std::min(kChunk, runs - chunk * kChunk);
    for (long run = 0; run < count; ++run) {
      RunRecord rec;
      StateId s = start;
      double stat1 = 0.0, stat2 = 0.0;
      for (int stage = 0;; ++stage) {
        if (game.is_absorbing(s)) {
          rec.absorbed = true;
          rec.stages = stage;
          break;
        }
        if (stage > rep.horizon) {
          rec.horizon_expired = true;
          rec.stages = stage;
          break;
        }
        const int a = draw_a[s](unit(rng));
        const int b = draw_b[s](unit(rng));
        stat1 += inc1[s](a);
        stat2 += inc2[s](b);
        rec.max_statistic1 = std::max(rec.max_statistic1, stat1);
        rec.max_statistic2 = std::max(rec.max_statistic2, stat2);
        if (stat1 > epsilon || stat2 > epsilon) {
          rec.punished = true;
          rec.first_violation_stage = stage;
          rec.trigger_player = stat1 > epsilon ? 1 : 2;
          rec.stages = stage;
          break;
        }
        s = draw_next[s][a * game.state(s).num_p2() + b](unit(rng));
      }
      punished += rec.punished;
      expired += rec.horizon_expired;
      if (rec.absorbed) {
        ++absorbed;
        absorption_stages += rec.stages;
      }
      max_stat += std::max(rec.max_statistic1, rec.max_statistic2);
      if (keep_records) rep.records.push_back(rec);
    }
  }
  const double total = std::max<long>(1, runs);
  rep.punishment_frequency = punished / total;
  std::tie(rep.punishment_low, rep.punishment_high) = wilson_interval(punished, runs);
  rep.horizon_expiry_frequency = expired / total;
  rep.absorption_frequency = absorbed / total;
  rep.never_violated_frequency = rep.absorption_frequency;
  rep.mean_absorption_stage = absorbed > 0 ? absorption_stages / absorbed : 0.0;
  rep.mean_max_statistic = max_stat / total;
  return rep;
}

GapReport test_and_punish_gap(const GameSpec& game, const StrategyProfile& profile, double epsilon,
                              const ZeroSumTables& tables, const std::vector<StateId>& starts, long max_cells) {
  const int n = game.num_states();
  if (tables.c1.size() != n || tables.c2.size() != n) {
    throw std::invalid_argument("deviation program needs undiscounted punishment values for both players");
  }
  const ChainAnalysis analysis(induce_chain(game, profile));
  const Eigen::VectorXd r[2] = {analysis.harmonic(game.payoff1()), analysis.harmonic(game.payoff2())};
  const Eigen::VectorXd* c[2] = {&tables.c1, &tables.c2};
  const StateSet from = starts.empty() ? game.non_absorbing_states() : starts;
  constexpr int kThreshold = 20;  // epsilon in buckets
  const double width = epsilon / kThreshold;

  GapReport rep;
  rep.epsilon = epsilon;
  for (int k = 0; k < 2; ++k) {
    const int player = k + 1;
    const int other = 1 - k;
    const DeviationProblem p = deviation_problem(game, profile, player);
    const BestResponse stationary = best_response_value(game, profile, player);

    // Follower's statistic.
    const DeviationProblem follower = deviation_problem(game, profile, 2 - k);
    for (StateId s : game.non_absorbing_states()) {
      const Eigen::VectorXd& strat = other == 0 ? profile.x[s] : profile.y[s];
      for (int m = 0; m < strat.size(); ++m) {
        if (strat(m) <= 0.0) continue;
        rep.opponent_increment =
            std::max(rep.opponent_increment, std::abs(follower.rows[s][m].dot(r[other]) - r[other](s)));
      }
    }

    // Per state and move: rounded increment, support, punishment value.
    std::vector<std::vector<int>> step(n);
    std::vector<std::vector<bool>> supported(n);
    std::vector<std::vector<double>> punish(n);
    int max_up = 0;
    for (StateId s : game.non_absorbing_states()) {
      const Eigen::VectorXd& own = k == 0 ? profile.x[s] : profile.y[s];
      for (size_t m = 0; m < p.rows[s].size(); ++m) {
        const Eigen::VectorXd& row = p.rows[s][m];
        const int up = static_cast<int>(std::lround((row.dot(r[k]) - r[k](s)) / width));
        step[s].push_back(up);
        supported[s].push_back(own(m) > 0.0);
        if (own(m) > 0.0) max_up = std::max(max_up, up);
        double value = 0.0;
        for (StateId t = 0; t < n; ++t) {
          if (row(t) > 0.0) value += row(t) * (game.is_absorbing(t) ? r[k](t) : (*c[k])(t) + epsilon);
        }
        punish[s].push_back(value);
      }
    }

    for (StateId start : from) {
      if (game.is_absorbing(start)) continue;
      DeviationGap gap;
      gap.player = player;
      gap.start = start;
      gap.bucket_width = width;
      gap.horizon = absorption_horizon(game, profile, start, epsilon / 10.0);
      const long low = std::min<long>(0, kThreshold - static_cast<long>(gap.horizon) * max_up) - 1;
      const long buckets = kThreshold - low + 1;
      if (buckets * n * (gap.horizon + 1L) > max_cells) {
        throw std::length_error("deviation program too large");
      }
      gap.buckets = static_cast<int>(buckets);
      auto cell = [&](StateId s, long m) { return static_cast<long>(s) * buckets + (m - low); };

      std::vector<double> next(n * buckets, 0.0), cur(n * buckets, 0.0);
      for (StateId s : game.non_absorbing_states()) {
        for (long m = low; m <= kThreshold; ++m) next[cell(s, m)] = (*c[k])(s) + epsilon;
      }
      for (int stage = gap.horizon; stage >= 0; --stage) {
        for (StateId s : game.non_absorbing_states()) {
          for (long m = low; m <= kThreshold; ++m) {
            double best = -std::numeric_limits<double>::infinity();
            for (size_t mv = 0; mv < p.rows[s].size(); ++mv) {
              const long moved = std::max(low, m + step[s][mv]);
              double value;
              if (!supported[s][mv] || moved > kThreshold) {
                value = punish[s][mv];
              } else {
                value = 0.0;
                const Eigen::VectorXd& row = p.rows[s][mv];
                for (StateId t = 0; t < n; ++t) {
                  if (row(t) <= 0.0) continue;
                  value += row(t) * (game.is_absorbing(t) ? r[k](t) : next[cell(t, moved)]);
                }
              }
              best = std::max(best, value);
            }
            cur[cell(s, m)] = best;
          }
        }
        std::swap(cur, next);
      }
      gap.value = next[cell(start, 0)];
      gap.payoff = r[k](start);
      gap.gap = gap.value - gap.payoff;
      gap.stationary_gap = stationary.values(start) - gap.payoff;
      rep.max_gap = std::max(rep.max_gap, gap.gap);
      rep.gaps.push_back(gap);
    }
  }
  rep.opponent_rounds_to_zero = rep.opponent_increment < width / 2.0;
  return rep;
}

// ---------------------------------------------------------------------------

TwoLayerChain two_layer_from_profile(const GameSpec& game, const StrategyProfile& profile, int player) {
  const DeviationProblem p = deviation_problem(game, profile, player);
  TwoLayerChain out;
  out.absorbing = p.absorbing;
  out.terminal = p.terminal;
  out.move_row = p.rows;
  for (StateId s = 0; s < p.n; ++s) out.move_prob.push_back(player == 1 ? profile.x[s] : profile.y[s]);
  return out;
}

TwoLayerChain random_walk_chain(int n, double step) {
  if (n < 2) throw std::invalid_argument("random walk needs at least three positions");
  if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("step probability must lie in (0,1]");
  TwoLayerChain out;
  const int size = n + 1;
  out.absorbing.assign(size, false);
  out.absorbing[0] = out.absorbing[n] = true;
  out.terminal = Eigen::VectorXd::Zero(size);
  out.terminal(n) = 1.0;
  out.move_prob.resize(size);
  out.move_row.resize(size);
  for (int x = 0; x < size; ++x) {
    if (out.absorbing[x]) {
      out.move_prob[x] = Eigen::VectorXd::Ones(1);
      out.move_row[x] = {Eigen::VectorXd::Unit(size, x)};
      continue;
    }
    out.move_prob[x] = Eigen::Vector2d(0.5, 0.5);
    for (int dir : {-1, 1}) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(size);
      row(x + dir) = step;
      row(x) += 1.0 - step;
      out.move_row[x].push_back(row);
    }
  }
  return out;
}

Eigen::VectorXd two_layer_values(const TwoLayerChain& chain) {
  const int n = chain.size();
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    if (chain.absorbing[x]) {
      kernel(x, x) = 1.0;
      continue;
    }
    for (Eigen::Index y = 0; y < chain.move_prob[x].size(); ++y) {
      kernel.row(x) += chain.move_prob[x](y) * chain.move_row[x][y].transpose();
    }
  }
  Eigen::VectorXd boundary = Eigen::VectorXd::Zero(n);
  for (int x = 0; x < n; ++x) {
    if (chain.absorbing[x]) boundary(x) = chain.terminal(x);
  }
  return detail::solve_fixed_boundary(kernel, chain.absorbing, boundary);
}

PartialSumReport partial_sum_check(const TwoLayerChain& chain, StateId start, double delta, double epsilon, long runs,
                                std::uint64_t seed, long max_steps) {
  PartialSumReport rep;
  rep.n = chain.size();
  rep.epsilon = epsilon;
  rep.delta = delta;
  const Eigen::VectorXd v = two_layer_values(chain);
  rep.m = v.maxCoeff() - v.minCoeff();
  rep.budget = rep.m > 0.0 ? epsilon * epsilon * epsilon / (rep.m * rep.n) : std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> edge(rep.n);
  for (int x = 0; x < rep.n; ++x) {
    edge[x] = Eigen::VectorXd::Zero(chain.move_prob[x].size());
    if (chain.absorbing[x]) continue;
    for (Eigen::Index y = 0; y < edge[x].size(); ++y) {
      edge[x](y) = chain.move_row[x][y].dot(v) - v(x);
      if (chain.move_prob[x](y) > 0.0 && std::abs(edge[x](y)) > rep.max_edge) {
        rep.max_edge = std::abs(edge[x](y));
        rep.witness_x = x;
        rep.witness_y = static_cast<int>(y);
      }
    }
  }
  rep.edges_within_delta = rep.max_edge <= delta + 1e-12;
  rep.admissible = rep.edges_within_delta && delta <= rep.budget && epsilon < 0.5;
  if (!rep.edges_within_delta) return rep;

  std::vector<Sampler> draw_move(rep.n);
  std::vector<std::vector<Sampler>> draw_next(rep.n);
  for (int x = 0; x < rep.n; ++x) {
    if (chain.absorbing[x]) continue;
    draw_move[x] = Sampler(chain.move_prob[x]);
    for (const Eigen::VectorXd& row : chain.move_row[x]) draw_next[x].emplace_back(row);
  }
  long hits = 0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (long chunk = 0; chunk * kChunk < runs; ++chunk) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(chunk)};
    std::mt19937_64 rng(seq);
    const long count = std::min(kChunk, runs - chunk * kChunk);
    for (long run = 0; run < count; ++run) {
      StateId x = start;
      double sum = 0.0;
      for (long steps = 0;; ++steps) {
        if (chain.absorbing[x]) break;
        if (steps >= max_steps) {
          ++rep.truncated;
          break;
        }
        const int y = draw_move[x](unit(rng));
        sum += edge[x](y);
        if (sum >= epsilon) {
          ++hits;
          break;
        }
        x = draw_next[x][y](unit(rng));
      }
    }
  }
  rep.runs = runs;
  rep.probability = runs > 0 ? static_cast<double>(hits) / runs : 0.0;
  std::tie(rep.low, rep.high) = wilson_interval(hits, runs);
  rep.holds = rep.high <= epsilon;
  return rep;
}

VariationSumReport variation_sum_check(const Chain& chain, const Eigen::VectorXd& boundary, StateId start, long runs,
                            std::uint64_t seed) {
  const ChainAnalysis analysis(chain);
  const Eigen::VectorXd v = analysis.harmonic(boundary);
  const int n = chain.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  VariationSumReport rep;
  rep.start = start;
  for (int x = 0; x < n; ++x) {
    if (chain.is_absorbing(x)) continue;
    for (int y = 0; y < n; ++y) w(x) += chain.kernel()(x, y) * std::abs(v(y) - v(x));
    rep.n += w(x) > 0.0;
  }
  rep.m = v.maxCoeff() - v.minCoeff();
  rep.bound = rep.m * rep.n;
  rep.exact = analysis.visit_matrix().row(start).dot(w);

  std::vector<Sampler> rows(n);
  for (int x = 0; x < n; ++x) {
    if (!chain.is_absorbing(x)) rows[x] = Sampler(chain.kernel().row(x).transpose());
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  for (long chunk = 0; chunk * kChunk < runs; ++chunk) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(chunk)};
    std::mt19937_64 rng(seq);
    const long count = std::min(kChunk, runs - chunk * kChunk);
    for (long run = 0; run < count; ++run) {
      StateId x = start;
      double total = 0.0;
      for (long steps = 0; !chain.is_absorbing(x) && steps < 100000000; ++steps) {
        total += w(x);
        x = rows[x](unit(rng));
      }
      sum += total;
      sum_sq += total * total;
    }
  }
  rep.runs = runs;
  if (runs > 0) {
    rep.estimate = sum / runs;
    rep.stddev = std::sqrt(std::max(0.0, sum_sq / runs - rep.estimate * rep.estimate));
  }
  rep.holds = rep.exact <= rep.bound + 1e-9 &&
              (runs == 0 || rep.estimate - 3.0 * rep.stddev / std::sqrt(static_cast<double>(runs)) <= rep.bound);
  return rep;
}

}  // namespace absorb_eq
