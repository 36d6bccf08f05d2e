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

#include "absorb_eq/fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace absorb_eq {

const char* reply_case_name(ReplyCase c) {
  switch (c) {
    case ReplyCase::kAbsorbingState:
      return "absorbing";
    case ReplyCase::kValueAboveJump:
      return "value_above_jump";
    case ReplyCase::kValueAtJump:
      return "value_equals_jump";
    case ReplyCase::kValueBelowJump:
      return "value_below_jump";
    case ReplyCase::kJumpOnly:
      return "jump_only";
  }
  return "unknown";
}

namespace {

std::vector<int> argmax_set(const Eigen::VectorXd& values, double tie) {
  const double best = values.maxCoeff();
  std::vector<int> out;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) >= best - tie) out.push_back(static_cast<int>(i));
  }
  return out;
}

bool contains(const std::vector<int>& set, int v) { return std::find(set.begin(), set.end(), v) != set.end(); }

std::vector<int> merge(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

Eigen::VectorXd aux_move_values(const AuxEvaluation& eval, StateId s) {
  Eigen::VectorXd out(eval.moves[s].size());
  for (size_t b = 0; b < eval.moves[s].size(); ++b) out(b) = eval.moves[s][b].aux_value;
  return out;
}

double mass_outside(const Eigen::VectorXd& d, const std::vector<int>& set) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!contains(set, static_cast<int>(i))) m += d(i);
  }
  return m;
}

Eigen::VectorXd uniform_on(int size, const std::vector<int>& set) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(size);
  for (int i : set) d(i) = 1.0 / set.size();
  return d;
}

}  // namespace

BestReplySets best_reply(const GameSpec& game, const StrategyProfile& profile, const ZeroSumTables& tables,
                         const AuxParams& params, const ReplyTolerances& tol) {
  check_profile(game, profile);
  const int n = game.num_states();
  BestReplySets out;
  out.p1.resize(n);
  out.p2.resize(n);
  out.cases.assign(n, ReplyCase::kAbsorbingState);
  out.w1.resize(n);

  const ChainAnalysis analysis(induce_chain(game, profile));
  out.absorbing = analysis.is_absorbing();
  out.trapped = analysis.trapped();
  out.r1 = analysis.expected_payoff(game.payoff1());
  const JumpTables jumps = jump_function(game, profile.x, tables);
  out.jump_discounted = jumps.jump_discounted;
  out.jump = jumps.argmax;
  if (out.absorbing) out.eval = auxiliary_values(game, profile, params);

  for (StateId s = 0; s < n; ++s) {
    const StateSpec& st = game.state(s);
    if (st.absorbing) {
      out.p1[s] = {0};
      out.p2[s] = {0};
      out.w1[s] = Eigen::VectorXd::Constant(1, out.r1(s));
      continue;
    }
    out.w1[s].resize(st.num_p1());
    for (int a = 0; a < st.num_p1(); ++a) out.w1[s](a) = mixed_row_p1_move(game, s, a, profile.y[s]).dot(out.r1);
    out.p1[s] = argmax_set(out.w1[s], tol.tie);

    if (!out.absorbing) {
      out.cases[s] = ReplyCase::kJumpOnly;
      out.p2[s] = out.jump[s];
      continue;
    }
    const double aux_value = out.eval->aux_value(s);
    const double j = out.jump_discounted(s);
    const std::vector<int> best_value = argmax_set(aux_move_values(*out.eval, s), tol.tie);
    if (aux_value > j + tol.band) {
      out.cases[s] = ReplyCase::kValueAboveJump;
      out.p2[s] = best_value;
    } else if (aux_value >= j - tol.band) {
      out.cases[s] = ReplyCase::kValueAtJump;
      out.p2[s] = merge(out.jump[s], best_value);
    } else {
      out.cases[s] = ReplyCase::kValueBelowJump;
      out.p2[s] = out.jump[s];
    }
  }
  return out;
}

double reply_residual(const GameSpec& game, const StrategyProfile& profile, const BestReplySets& reply) {
  double worst = 0.0;
  for (StateId s : game.non_absorbing_states()) {
    worst = std::max({worst, mass_outside(profile.x[s], reply.p1[s]), mass_outside(profile.y[s], reply.p2[s])});
  }
  return worst;
}

namespace {

struct Evaluated {
  double residual = 1.0;
  BestReplySets reply;
};

Evaluated evaluate(const GameSpec& game, const StrategyProfile& profile, const ZeroSumTables& tables,
                   const AuxParams& params, const ReplyTolerances& tol) {
  Evaluated e;
  e.reply = best_reply(game, profile, tables, params, tol);
  e.residual = reply_residual(game, profile, e.reply);
  return e;
}

// Profile with the mass outside the best-reply sets removed.
StrategyProfile restrict_to(const GameSpec& game, const StrategyProfile& profile, const BestReplySets& reply) {
  StrategyProfile out = profile;
  for (StateId s : game.non_absorbing_states()) {
    auto cut = [](Eigen::VectorXd& d, const std::vector<int>& set) {
      Eigen::VectorXd kept = Eigen::VectorXd::Zero(d.size());
      for (int i : set) kept(i) = d(i);
      d = kept.sum() > 0.0 ? Eigen::VectorXd(kept / kept.sum()) : uniform_on(static_cast<int>(d.size()), set);
    };
    cut(out.x[s], reply.p1[s]);
    cut(out.y[s], reply.p2[s]);
  }
  return out;
}

StrategyProfile random_profile(const GameSpec& game, std::mt19937_64& rng) {
  std::exponential_distribution<double> draw(1.0);
  StrategyProfile p = uniform_profile(game);
  for (StateId s : game.non_absorbing_states()) {
    for (Eigen::VectorXd* d : {&p.x[s], &p.y[s]}) {
      for (Eigen::Index i = 0; i < d->size(); ++i) (*d)(i) = draw(rng);
      *d /= d->sum();
    }
  }
  return p;
}

// All distributions on k points with coordinates in multiples of 1/res.
std::vector<Eigen::VectorXd> simplex_grid(int k, int res) {
  std::vector<Eigen::VectorXd> out;
  std::vector<int> counts(k, 0);
  auto rec = [&](auto&& self, int i, int left) -> void {
    if (i == k - 1) {
      counts[i] = left;
      Eigen::VectorXd d(k);
      for (int j = 0; j < k; ++j) d(j) = static_cast<double>(counts[j]) / res;
      out.push_back(d);
      return;
    }
    for (int c = left; c >= 0; --c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  rec(rec, 0, res);
  return out;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct GridSlot {
  StateId state;
  bool p1;
  int actions;
};

}  // namespace

FixedPointCandidate find_fixed_point(const GameSpec& game, const ZeroSumTables& tables, const AuxParams& params,
                                     const FixedPointSolver& solver, const std::optional<StrategyProfile>& initial) {
  FixedPointCandidate best;
  best.profile = initial ? *initial : uniform_profile(game);
  best.residual = std::numeric_limits<double>::infinity();
  check_profile(game, best.profile);

  // Absorbing candidates rank ahead of non-absorbing ones; only they are
  // accepted.
  bool best_absorbing = false;
  auto better = [&](bool absorbing, double residual) {
    if (absorbing != best_absorbing) return absorbing;
    return residual < best.residual;
  };
  auto offer = [&](const StrategyProfile& p, const Evaluated& e, int restart, double eta) {
    if (better(e.reply.absorbing, e.residual)) {
      best.profile = p;
      best.residual = e.residual;
      best.restart = restart;
      best.final_eta = eta;
      best_absorbing = e.reply.absorbing;
    }
    return e.reply.absorbing && e.residual <= solver.tolerance;
  };

  int total = 0;
  bool done = false;
  for (int restart = 0; restart < std::max(1, solver.restarts) && !done; ++restart) {
    StrategyProfile p = best.profile;
    if (restart == 0) {
      p = initial ? *initial : uniform_profile(game);
    } else {
      std::seed_seq seq{solver.seed, static_cast<std::uint64_t>(restart)};
      std::mt19937_64 rng(seq);
      p = random_profile(game, rng);
    }
    double eta = solver.eta0;
    for (int it = 0; it <= solver.max_iters && !done; ++it) {
      const Evaluated e = evaluate(game, p, tables, params, solver.reply);
      ++total;
      if (offer(p, e, restart, eta)) {
        done = true;
        break;
      }
      const StrategyProfile snapped = restrict_to(game, p, e.reply);
      const Evaluated es = evaluate(game, snapped, tables, params, solver.reply);
      if (offer(snapped, es, restart, eta)) {
        done = true;
        break;
      }
      if (it == solver.max_iters) break;
      for (StateId s : game.non_absorbing_states()) {
        p.x[s] = (1.0 - eta) * p.x[s] + eta * uniform_on(game.state(s).num_p1(), e.reply.p1[s]);
        p.y[s] = (1.0 - eta) * p.y[s] + eta * uniform_on(game.state(s).num_p2(), e.reply.p2[s]);
      }
      eta = std::max(solver.eta_min, eta * solver.eta_decay);
    }
  }
  best.iterations = total;
  best.converged = done;
  if (done || !solver.grid_fallback) return best;

  const StateSet active = game.non_absorbing_states();
  if (active.size() > 2 || game.max_actions() > 3) return best;
  std::vector<GridSlot> slots;
  for (StateId s : active) {
    if (game.state(s).num_p1() > 1) slots.push_back({s, true, game.state(s).num_p1()});
    if (game.state(s).num_p2() > 1) slots.push_back({s, false, game.state(s).num_p2()});
  }
  int res = std::max(1, solver.grid_resolution);
  auto grid_size = [&](int r) {
    double size = 1.0;
    for (const GridSlot& g : slots) size *= binomial(r + g.actions - 1, g.actions - 1);
    return size;
  };
  while (res > 1 && grid_size(res) > static_cast<double>(solver.max_grid_points)) res /= 2;
  std::vector<std::vector<Eigen::VectorXd>> choices;
  for (const GridSlot& g : slots) choices.push_back(simplex_grid(g.actions, res));

  std::vector<size_t> index(slots.size(), 0);
  StrategyProfile p = uniform_profile(game);
  long points = 0;
  while (true) {
    for (size_t i = 0; i < slots.size(); ++i) {
      (slots[i].p1 ? p.x : p.y)[slots[i].state] = choices[i][index[i]];
    }
    ++points;
    const Evaluated e = evaluate(game, p, tables, params, solver.reply);
    if (better(e.reply.absorbing, e.residual)) {
      best.profile = p;
      best.residual = e.residual;
      best.restart = -1;
      best.from_grid = true;
      best_absorbing = e.reply.absorbing;
    }
    if (best_absorbing && best.residual <= solver.tolerance) break;
    size_t k = 0;
    while (k < index.size() && ++index[k] == choices[k].size()) index[k++] = 0;
    if (k == index.size()) break;
  }
  best.grid_resolution = res;
  best.grid_points = points;
  best.converged = best_absorbing && best.residual <= solver.tolerance;
  return best;
}

RegimeReport regime_report(const GameSpec& game, const ZeroSumTables& tables, const AuxParams& params) {
  RegimeReport r;
  const double n = std::max<size_t>(1, game.non_absorbing_states().size());
  const double oa = game.omega * tables.alpha;
  r.l = params.q1 * params.q2;
  r.l_star = oa > 0.0 ? 100.0 * n / (oa * oa * params.epsilon_bar) : std::numeric_limits<double>::infinity();
  r.delta = params.delta;
  r.delta_star = params.epsilon_bar * oa * oa * oa / (300.0 * n);
  r.epsilon_bar = params.epsilon_bar;
  r.epsilon_bar_max = oa / 4.0;
  r.within_constants = r.epsilon_bar <= r.epsilon_bar_max && r.l >= r.l_star && r.delta > 0.0 && r.delta <= r.delta_star;
  return r;
}

bool CandidateDiagnosis::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const DiagnosticCheck& c) { return c.evaluated && c.passed; });
}

namespace {

// Tracks the smallest slack seen; passes while it stays non-negative.
struct MarginTracker {
  DiagnosticCheck check;
  explicit MarginTracker(std::string name) {
    check.name = std::move(name);
    check.vacuous = true;
    check.margin = std::numeric_limits<double>::infinity();
  }
  void add(double slack, StateId s, int move = -1) {
    check.vacuous = false;
    if (slack < check.margin) {
      check.margin = slack;
      check.witness = s;
      check.witness_move = move;
    }
  }
  DiagnosticCheck finish() {
    if (check.vacuous) check.margin = 0.0;
    check.passed = check.vacuous || check.margin >= 0.0;
    return check;
  }
};

}  // namespace

CandidateDiagnosis diagnose_candidate(const GameSpec& game, const StrategyProfile& profile,
                                      const ZeroSumTables& tables, const AuxParams& params,
                                      const ReplyTolerances& tol) {
  CandidateDiagnosis out;
  out.regime = regime_report(game, tables, params);
  const BestReplySets reply = best_reply(game, profile, tables, params, tol);
  const StateSet active = game.non_absorbing_states();

  MarginTracker absorbing("a_absorbing");
  if (reply.absorbing) {
    for (StateId s : active) absorbing.add(reply.eval->a(s), s);
  } else {
    absorbing.add(-1.0, reply.trapped.empty() ? -1 : reply.trapped.front());
  }
  out.checks.push_back(absorbing.finish());
  if (!reply.absorbing) {
    for (const char* name : {"b_payoff_above_jump", "c_value_above_jump", "d_jump_moves_low", "e_jump_frequency",
                             "f_small_absorption"}) {
      DiagnosticCheck c;
      c.name = name;
      c.evaluated = false;
      c.passed = false;
      out.checks.push_back(c);
    }
    return out;
  }
  const AuxEvaluation& eval = *reply.eval;
  const double eb = params.epsilon_bar;

  MarginTracker payoff("b_payoff_above_jump"), value_jump("c_value_above_jump"), low("d_jump_moves_low"),
      freq("e_jump_frequency"), small("f_small_absorption");
  for (StateId s : active) {
    payoff.add(eval.r2(s) - reply.jump_discounted(s) + tol.band, s);
    value_jump.add(eval.aux_value(s) - reply.jump_discounted(s) + tol.band, s);

    const std::vector<int> best_value = argmax_set(aux_move_values(eval, s), tol.tie);
    double jump_mass = 0.0;
    if (reply.cases[s] == ReplyCase::kValueAtJump || reply.cases[s] == ReplyCase::kValueBelowJump) {
      for (int b : reply.jump[s]) {
        if (profile.y[s](b) <= 0.0 || contains(best_value, b)) continue;
        jump_mass += profile.y[s](b);
        low.add(eval.r2(s) - 3.0 * eb + tol.band - eval.aux_value(s), s, b);
        low.add(eb - eval.moves[s][b].g, s, b);
      }
    }
    out.jump_mass = std::max(out.jump_mass, jump_mass);
    if (jump_mass > 0.0) freq.add(game.omega * tables.alpha / 20.0 - jump_mass, s);

    if (eval.aux_value(s) <= eval.r2(s) - 2.0 * eb) {
      for (const MoveEvaluation& m : eval.moves[s]) {
        if (m.frequency <= 0.0 || m.g > eb) continue;
        small.add(1.1 * params.delta * eval.aux_value(s) / eval.order_weight(s) - m.g, s, m.move);
        small.add(2.3 * eb * eval.aux_rate(s) - m.g, s, m.move);
      }
    }
  }
  for (MarginTracker* t : {&payoff, &value_jump, &low, &freq, &small}) out.checks.push_back(t->finish());
  return out;
}

}  // namespace absorb_eq
