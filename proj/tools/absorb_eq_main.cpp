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

// Command-line front end. Every command reads a game file, validates it and
// writes one JSON report (schema "absorb-eq/1", sorted keys) or the same
// report flattened to "path = value" lines. Reports carry no timings, so
// identical inputs, options and seeds give byte-identical output.
//
// Exit codes: 0 ok, 1 internal error, 2 parse error (files or command
// line), 3 validation failure, 4 non-convergence, 5 certification failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absorb_eq/aux_eval.hpp"
#include "absorb_eq/chain_engine.hpp"
#include "absorb_eq/fixed_point.hpp"
#include "absorb_eq/game_io.hpp"
#include "absorb_eq/game_model.hpp"
#include "absorb_eq/transforms.hpp"
#include "absorb_eq/verifier.hpp"
#include "absorb_eq/zerosum.hpp"
#include "json.hpp"

namespace absorb_eq {
namespace {

using json = nlohmann::json;

constexpr const char* kSchema = "absorb-eq/1";
constexpr double kIdentityTolerance = 1e-9;

enum ExitCode {
  kOk = 0,
  kInternal = 1,
  kParse = 2,
  kValidation = 3,
  kNonConvergence = 4,
  kCertification = 5,
};

struct Options {
  std::string command;
  std::string game_path;
  std::string profile_path;
  std::string output_path;
  std::string format = "json";
  std::uint64_t seed = 0;

  double alpha = 0.01;
  double epsilon = 0.1;
  double epsilon_bar = 0.1;
  double delta = 0.001;
  double q1 = 2.0, q2 = 2.0;
  double tol = 1e-12;
  double tolerance = 1e-6;
  double threshold = 0.01;
  int max_iters = 2000;
  int restarts = 16;
  bool no_grid = false;
  int grid_resolution = 64;
  int n = 0;
  long runs = 10000;
  int horizon = 0;
  std::string state;
  std::string move;
  std::string op = "simplify";
  std::string blocks;
  bool gap = false;
};

// Validation failure carrying its report.
struct InvalidGame {
  json report;
};

json validation_json(const ValidationReport& report) {
  json issues = json::array();
  for (const ValidationIssue& issue : report.issues) {
    issues.push_back({{"location", issue.location}, {"message", issue.message}});
  }
  return {{"ok", report.ok}, {"absorbing_forcible_p2", report.is_absorbing_forcible_p2}, {"issues", issues}};
}

GameSpec load_game(const std::string& path) {
  GameSpec game = parse_game(read_text_file(path));
  const ValidationReport report = validate_game(game);
  if (!report.ok) throw InvalidGame{validation_json(report)};
  return game;
}

StrategyProfile load_profile(const GameSpec& game, const std::string& path) {
  return path.empty() ? uniform_profile(game) : parse_profile(game, read_text_file(path));
}

json by_state(const GameSpec& game, const Eigen::VectorXd& values) {
  json out = json::object();
  for (StateId s = 0; s < game.num_states() && s < values.size(); ++s) out[game.state(s).name] = values(s);
  return out;
}

json by_non_absorbing_state(const GameSpec& game, const Eigen::VectorXd& values) {
  json out = json::object();
  for (StateId s : game.non_absorbing_states()) out[game.state(s).name] = values(s);
  return out;
}

json distribution(const std::vector<std::string>& names, const Eigen::VectorXd& p) {
  json out = json::object();
  for (int k = 0; k < p.size(); ++k) {
    if (p(k) != 0.0) out[names[k]] = p(k);
  }
  return out;
}

json names_of(const std::vector<std::string>& names, const std::vector<int>& indices) {
  json out = json::array();
  for (int k : indices) out.push_back(names[k]);
  return out;
}

json state_names(const GameSpec& game, const StateSet& states) {
  json out = json::array();
  for (StateId s : states) out.push_back(game.state(s).name);
  return out;
}

// A checked quantity with what it was checked against.
json check(double value, const char* relation, double bound, bool passed) {
  return {{"value", value}, {"relation", relation}, {"bound", bound}, {"passed", passed}};
}

json at_most(double value, double bound) { return check(value, "<=", bound, value <= bound); }

StateId state_or_first(const GameSpec& game, const std::string& name) {
  if (name.empty()) {
    const StateSet na = game.non_absorbing_states();
    if (na.empty()) throw std::invalid_argument("game has no non-absorbing state");
    return na.front();
  }
  try {
    return game.index_of(name);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("unknown state \"" + name + "\"");
  }
}

int move_index(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("unknown move \"" + name + "\"");
  return static_cast<int>(it - names.begin());
}

AuxParams aux_params(const GameSpec& game, const Options& opt) {
  return make_aux_params(opt.epsilon_bar, opt.delta, opt.q1, opt.q2,
                         static_cast<int>(game.non_absorbing_states().size()));
}

// ---------------------------------------------------------------------------
// Commands. Each fills `result` and returns the exit code.

int run_validate(const Options& opt, json& result) {
  const GameSpec game = parse_game(read_text_file(opt.game_path));
  const ValidationReport report = validate_game(game);
  result = validation_json(report);
  result["rho"] = game.rho();
  return report.ok ? kOk : kValidation;
}

int run_analyze(const Options& opt, const GameSpec& game, json& result) {
  const StrategyProfile profile = load_profile(game, opt.profile_path);
  const ChainAnalysis analysis(induce_chain(game, profile));
  const int n = game.num_states();

  result["absorbing"] = analysis.is_absorbing();
  result["trapped"] = state_names(game, analysis.trapped());
  json esc = json::object(), metric = json::object();
  for (StateId t = 0; t < n; ++t) {
    json esc_row = json::object(), mu_row = json::object();
    for (StateId s = 0; s < n; ++s) {
      if (s != t) esc_row[game.state(s).name] = analysis.esc(t, s);
      mu_row[game.state(s).name] = analysis.metric(t, s);
    }
    esc[game.state(t).name] = esc_row;
    metric[game.state(t).name] = mu_row;
  }
  result["esc"] = esc;
  result["metric"] = metric;

  json states = json::object();
  for (StateId s = 0; s < n; ++s) {
    const double visits = analysis.expected_visits(s);
    states[game.state(s).name] = {{"absorbing", game.is_absorbing(s)},
                                  {"a", analysis.absorption_rate(s)},
                                  {"expected_visits", std::isfinite(visits) ? json(visits) : json("inf")}};
  }
  result["states"] = states;
  result["r1"] = by_state(game, analysis.expected_payoff(game.payoff1()));
  result["r2"] = by_state(game, analysis.expected_payoff(game.payoff2()));

  if (analysis.is_absorbing()) {
    json parts = json::object();
    for (StateId s : game.non_absorbing_states()) {
      const StateSpec& st = game.state(s);
      json list = json::array();
      for (const Part& part : analysis.chain().parts(s)) {
        if (part.frequency == 0.0) continue;
        const PartStatistics p2 = analysis.part_statistics(part, game.payoff2());
        const PartStatistics p1 = analysis.part_statistics(part, game.payoff1());
        list.push_back({{"a", st.p1_actions[part.p1_action]},
                        {"b", st.p2_actions[part.p2_action]},
                        {"frequency", p2.frequency},
                        {"g", p2.g},
                        {"importance", p2.importance_undefined ? json(nullptr) : json(p2.importance)},
                        {"v1", p1.v},
                        {"v2", p2.v},
                        {"w1", p1.w},
                        {"w2", p2.w}});
      }
      parts[st.name] = list;
    }
    result["parts"] = parts;
    const IdentityReport ids = check_taboo_identities(analysis);
    result["identities"] = {{"pairs", ids.pairs},
                            {"escape_identity", at_most(ids.escape_identity, kIdentityTolerance)},
                            {"escape_identity_alt", at_most(ids.escape_identity_alt, kIdentityTolerance)},
                            {"rate_identity", at_most(ids.rate_identity, kIdentityTolerance)},
                            {"escape_bounds", at_most(ids.escape_bounds, kIdentityTolerance)},
                            {"composition", at_most(ids.composition, kIdentityTolerance)},
                            {"metric", at_most(ids.metric, kIdentityTolerance)}};
  }
  return kOk;
}

int run_solve_zerosum(const Options& opt, const GameSpec& game, json& result) {
  const ZeroSumTables tables = zero_sum_tables(game, opt.alpha, opt.epsilon, opt.tol);
  result["punish_discounted"] = by_state(game, tables.punish_discounted);
  result["c_alpha_error_bound"] = tables.tolerance;
  result["c1"] = by_state(game, tables.c1);
  result["c2"] = by_state(game, tables.c2);
  json punisher = json::object();
  for (StateId s : game.non_absorbing_states()) {
    punisher[game.state(s).name] = distribution(game.state(s).p1_actions, tables.punisher_strategy[s]);
  }
  result["punisher_strategy"] = punisher;

  bool converged = true;
  json limits = json::object();
  for (int player : {1, 2}) {
    const UndiscountedValue u = undiscounted_value(game, player, opt.epsilon, opt.tol);
    converged = converged && u.converged;
    limits[player == 1 ? "player1" : "player2"] = {{"alpha", u.alpha},
                                                  {"converged", u.converged},
                                                  {"grid_points", u.alphas.size()},
                                                  {"last_change", at_most(u.last_change, opt.epsilon / 4)}};
  }
  result["undiscounted"] = limits;

  if (!opt.profile_path.empty()) {
    const StrategyProfile profile = load_profile(game, opt.profile_path);
    const JumpTables jumps = jump_function(game, profile.x, tables, profile.y);
    json argmax = json::object();
    for (StateId s : game.non_absorbing_states()) {
      argmax[game.state(s).name] = names_of(game.state(s).p2_actions, jumps.argmax[s]);
    }
    const SubmartingaleReport sub = submartingale_check(game, profile.x, tables);
    result["jump"] = {{"jump_discounted", by_state(game, jumps.jump_discounted)},
                      {"j1", by_state(game, jumps.j1)},
                      {"j2", by_state(game, jumps.j2)},
                      {"argmax", argmax},
                      {"submartingale", {{"pairs", sub.pairs}, {"max_violation", at_most(sub.max_violation, 1e-9)}}}};
  }
  return converged ? kOk : kNonConvergence;
}

int run_aux_eval(const Options& opt, const GameSpec& game, json& result) {
  const StrategyProfile profile = load_profile(game, opt.profile_path);
  const AuxEvaluation eval = auxiliary_values(game, profile, aux_params(game, opt));
  json states = json::object();
  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    json moves = json::object();
    for (const MoveEvaluation& m : eval.moves[s]) {
      moves[st.p2_actions[m.move]] = {{"frequency", m.frequency}, {"g", m.g},   {"scaled_escape", m.scaled_escape},
                                      {"escape_factor", m.escape_factor},         {"v2", m.v2}, {"scaled_value2", m.scaled_value2},
                                      {"aux_value", m.aux_value}};
    }
    states[st.name] = {{"r2", eval.r2(s)},           {"a", eval.a(s)},   {"aux_rate", eval.aux_rate(s)},
                       {"order_weight", eval.order_weight(s)}, {"aux_value", eval.aux_value(s)}, {"aux_value_max", eval.aux_value_max(s)},
                       {"moves", moves}};
  }
  result["states"] = states;
  result["residuals"] = {{"identity", at_most(eval.identity_residual, kIdentityTolerance)},
                         {"consistency", at_most(eval.consistency_residual, kIdentityTolerance)},
                         {"r2", at_most(eval.r2_residual, kIdentityTolerance)}};

  if (opt.runs > 0) {
    const StateId s = state_or_first(game, opt.state);
    const int move = opt.move.empty() ? -1 : move_index(game.state(s).p2_actions, opt.move);
    const MonteCarloEstimate mc = auxiliary_monte_carlo(game, profile, eval, s, move, opt.runs, opt.seed, opt.horizon);
    const double exact = move < 0 ? eval.aux_value(s) : eval.moves[s][move].aux_value;
    result["monte_carlo"] = {{"state", game.state(s).name},
                             {"move", move < 0 ? json(nullptr) : json(opt.move)},
                             {"estimate", mc.estimate},
                             {"ci99_halfwidth", mc.halfwidth},
                             {"closed_form", exact},
                             {"inside_ci", std::abs(mc.estimate - exact) <= mc.halfwidth},
                             {"runs", mc.runs},
                             {"truncated", mc.truncated},
                             {"horizon", mc.horizon}};
  }
  return kOk;
}

json diagnosis_json(const GameSpec& game, const CandidateDiagnosis& d) {
  json checks = json::array();
  for (const DiagnosticCheck& c : d.checks) {
    json witness = nullptr;
    if (c.witness >= 0) {
      witness = {{"state", game.state(c.witness).name},
                 {"move", c.witness_move >= 0 ? json(game.state(c.witness).p2_actions[c.witness_move])
                                              : json(nullptr)}};
    }
    checks.push_back({{"name", c.name},
                      {"evaluated", c.evaluated},
                      {"vacuous", c.vacuous},
                      {"passed", c.passed},
                      {"margin", c.margin},
                      {"witness", witness}});
  }
  const RegimeReport& r = d.regime;
  return {{"checks", checks},
          {"jump_mass", d.jump_mass},
          {"ok", d.ok()},
          {"regime",
           {{"l", r.l},
            {"l_star", r.l_star},
            {"delta", r.delta},
            {"delta_star", r.delta_star},
            {"epsilon_bar", r.epsilon_bar},
            {"epsilon_bar_max", r.epsilon_bar_max},
            {"within_constants", r.within_constants}}}};
}

int run_fixed_point(const Options& opt, const GameSpec& game, json& result) {
  const ZeroSumTables tables = discounted_values(game, opt.alpha, opt.tol);
  const AuxParams params = aux_params(game, opt);
  FixedPointSolver solver;
  solver.max_iters = opt.max_iters;
  solver.restarts = opt.restarts;
  solver.tolerance = opt.tolerance;
  solver.seed = opt.seed;
  solver.grid_fallback = !opt.no_grid;
  solver.grid_resolution = opt.grid_resolution;
  std::optional<StrategyProfile> initial;
  if (!opt.profile_path.empty()) initial = load_profile(game, opt.profile_path);
  const FixedPointCandidate fp = find_fixed_point(game, tables, params, solver, initial);

  result["converged"] = fp.converged;
  result["residual"] = at_most(fp.residual, opt.tolerance);
  result["iterations"] = fp.iterations;
  result["restart"] = fp.restart;
  result["final_eta"] = fp.final_eta;
  result["from_grid"] = fp.from_grid;
  result["grid_resolution"] = fp.grid_resolution;
  result["grid_points"] = fp.grid_points;
  result["profile"] = profile_to_json(game, fp.profile);

  const BestReplySets reply = best_reply(game, fp.profile, tables, params);
  json cases = json::object();
  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    cases[st.name] = {{"case", reply_case_name(reply.cases[s])},
                      {"p1", names_of(st.p1_actions, reply.p1[s])},
                      {"p2", names_of(st.p2_actions, reply.p2[s])},
                      {"jump", names_of(st.p2_actions, reply.jump[s])},
                      {"jump_discounted", reply.jump_discounted(s)}};
  }
  result["best_reply"] = cases;
  result["diagnosis"] = diagnosis_json(game, diagnose_candidate(game, fp.profile, tables, params));
  return fp.converged ? kOk : kNonConvergence;
}

std::vector<StateSet> parse_blocks(const GameSpec& game, const std::string& spec) {
  std::vector<StateSet> blocks;
  std::vector<bool> listed(game.num_states(), false);
  std::stringstream groups(spec);
  std::string group;
  while (std::getline(groups, group, ';')) {
    StateSet block;
    std::stringstream names(group);
    std::string name;
    while (std::getline(names, name, ',')) {
      if (name.empty()) continue;
      const StateId s = state_or_first(game, name);
      if (game.is_absorbing(s) || listed[s]) throw std::invalid_argument("bad block member \"" + name + "\"");
      listed[s] = true;
      block.push_back(s);
    }
    if (!block.empty()) blocks.push_back(block);
  }
  for (StateId s : game.non_absorbing_states()) {
    if (!listed[s]) blocks.push_back({s});
  }
  return blocks;
}

int run_transform(const Options& opt, const GameSpec& game, json& result) {
  const StrategyProfile profile = load_profile(game, opt.profile_path);
  result["op"] = opt.op;
  if (opt.op == "simplify") {
    const std::vector<MoveRemoval> removals = rare_moves(game, profile, opt.threshold);
    const ProfileSimplification simple = simplify(game, profile, removals);
    json removed = json::array();
    for (const MoveRemoval& r : removals) {
      const StateSpec& st = game.state(r.state);
      removed.push_back({{"state", st.name},
                         {"player", r.player},
                         {"action", r.player == 1 ? st.p1_actions[r.action] : st.p2_actions[r.action]}});
    }
    result["removed"] = removed;
    result["profile"] = profile_to_json(game, simple.profile);
    const ChainAnalysis before(induce_chain(game, profile));
    const ChainAnalysis after(induce_chain(game, simple.profile));
    result["absorbing_after"] = after.is_absorbing();
    for (int player : {1, 2}) {
      const Eigen::VectorXd r0 = before.expected_payoff(game.payoff(player));
      const Eigen::VectorXd r = after.expected_payoff(game.payoff(player));
      const std::string key = player == 1 ? "r1" : "r2";
      result[key] = {{"before", by_state(game, r0)},
                     {"after", by_state(game, r)},
                     {"max_change", (r - r0).cwiseAbs().maxCoeff()}};
    }
    return kOk;
  }
  if (opt.op == "contract") {
    const Chain chain = induce_chain(game, profile);
    const ContractionResult contraction = contract(chain, default_exits(chain, parse_blocks(game, opt.blocks)));
    const double delta = std::max(opt.delta, contraction.exit_avoidance_gap);
    const ContractionReport rep = check_contraction(chain, contraction, delta, game.payoff2());
    result["blocks"] = contraction.non_singleton_blocks;
    result["exit_avoidance_gap"] = contraction.exit_avoidance_gap;
    result["delta"] = delta;
    result["taboo_factor_from_b"] = at_most(rep.taboo_factor_from_b, rep.taboo_bound);
    result["taboo_factor_from_a"] = at_most(rep.taboo_factor_from_a, rep.taboo_bound);
    result["harmonic_gap"] = at_most(rep.harmonic_gap, rep.harmonic_bound);
    result["representative_gap"] = at_most(rep.representative_gap, 1e-9);
    result["taboo_pairs"] = rep.taboo_pairs;
    result["hypotheses_hold"] = rep.hypotheses_hold;
    result["hypothesis_failures"] = rep.hypothesis_failures;
    result["holds"] = rep.holds;
    result["contracted_states"] = contraction.contracted.names();
    return kOk;
  }
  throw std::invalid_argument("unknown transform \"" + opt.op + "\"");
}

json margins_json(const GameSpec& game, const std::vector<CertificateMargin>& margins) {
  json out = json::array();
  for (const CertificateMargin& m : margins) {
    const StateSpec& st = game.state(m.state);
    const std::vector<std::string>& moves = m.player == 1 ? st.p1_actions : st.p2_actions;
    out.push_back({{"player", m.player},
                   {"state", st.name},
                   {"move", m.move >= 0 ? json(moves[m.move]) : json(nullptr)},
                   {"value", m.value},
                   {"margin", m.margin}});
  }
  return out;
}

int run_verify(const Options& opt, const GameSpec& game, json& result) {
  const StrategyProfile profile = load_profile(game, opt.profile_path);
  if (!is_absorbing_chain(induce_chain(game, profile))) {
    result["certified"] = false;
    result["reason"] = "profile is not absorbing";
    return kCertification;
  }
  const ZeroSumTables tables = zero_sum_tables(game, opt.alpha, opt.epsilon, opt.tol);
  const Certificate cert = certify_profile(game, profile, opt.epsilon, tables, opt.n);
  result["certified"] = cert.certified;
  result["epsilon_in_range"] = cert.epsilon_in_range;
  result["n"] = cert.n;
  result["m"] = cert.m;
  result["delta"] = at_most(cert.delta_used, cert.delta_budget);
  result["r1"] = by_state(game, cert.r1);
  result["r2"] = by_state(game, cert.r2);
  result["j1"] = by_non_absorbing_state(game, cert.j1);
  result["j2"] = by_non_absorbing_state(game, cert.j2);
  result["payoff_margins"] = margins_json(game, cert.payoff_margins);
  result["move_margins"] = margins_json(game, cert.move_margins);
  result["witnesses"] = margins_json(game, cert.witnesses);

  json responses = json::object();
  for (int player : {1, 2}) {
    const BestResponse br = best_response_value(game, profile, player);
    const Eigen::VectorXd r = player == 1 ? cert.r1 : cert.r2;
    responses[player == 1 ? "player1" : "player2"] = {{"values", by_state(game, br.values)},
                                                      {"max_gain", (br.values - r).maxCoeff()},
                                                      {"never_absorbs", br.never_absorbs},
                                                      {"bellman_residual", br.bellman_residual}};
  }
  result["stationary_best_response"] = responses;

  bool gap_ok = true;
  if (opt.gap) {
    const GapReport gaps = test_and_punish_gap(game, profile, opt.epsilon, tables);
    json list = json::array();
    for (const DeviationGap& g : gaps.gaps) {
      list.push_back({{"player", g.player},
                      {"start", game.state(g.start).name},
                      {"horizon", g.horizon},
                      {"buckets", g.buckets},
                      {"bucket_width", g.bucket_width},
                      {"value", g.value},
                      {"payoff", g.payoff},
                      {"gap", g.gap},
                      {"stationary_gap", g.stationary_gap}});
    }
    gap_ok = gaps.max_gap <= 4 * opt.epsilon;
    result["test_and_punish"] = {{"gaps", list},
                                 {"max_gap", at_most(gaps.max_gap, 4 * opt.epsilon)},
                                 {"opponent_increment", gaps.opponent_increment},
                                 {"opponent_rounds_to_zero", gaps.opponent_rounds_to_zero}};
  }
  return cert.certified && gap_ok ? kOk : kCertification;
}

int run_simulate(const Options& opt, const GameSpec& game, json& result) {
  const StrategyProfile profile = load_profile(game, opt.profile_path);
  const StateId start = state_or_first(game, opt.state);
  const SimulationReport rep = simulate_test_and_punish(game, profile, opt.epsilon, start, opt.runs, opt.seed);
  result["start"] = game.state(start).name;
  result["runs"] = rep.runs;
  result["horizon"] = rep.horizon;
  result["punishment"] = {{"frequency", rep.punishment_frequency},
                          {"ci99", {rep.punishment_low, rep.punishment_high}},
                          {"bound", opt.epsilon},
                          {"within_bound", rep.punishment_high <= opt.epsilon}};
  result["never_violated_frequency"] = rep.never_violated_frequency;
  result["horizon_expiry_frequency"] = rep.horizon_expiry_frequency;
  result["absorption_frequency"] = rep.absorption_frequency;
  result["mean_absorption_stage"] = rep.mean_absorption_stage;
  result["mean_max_statistic"] = rep.mean_max_statistic;
  return kOk;
}

int dispatch(const Options& opt, json& result) {
  if (opt.command == "validate") return run_validate(opt, result);
  const GameSpec game = load_game(opt.game_path);
  if (opt.command == "analyze") return run_analyze(opt, game, result);
  if (opt.command == "solve-zerosum") return run_solve_zerosum(opt, game, result);
  if (opt.command == "aux-eval") return run_aux_eval(opt, game, result);
  if (opt.command == "fixed-point") return run_fixed_point(opt, game, result);
  if (opt.command == "transform") return run_transform(opt, game, result);
  if (opt.command == "verify") return run_verify(opt, game, result);
  if (opt.command == "simulate") return run_simulate(opt, game, result);
  throw std::logic_error("unhandled command " + opt.command);
}

const char* status_name(int code) {
  switch (code) {
    case kOk: return "ok";
    case kParse: return "parse_error";
    case kValidation: return "validation_failed";
    case kNonConvergence: return "not_converged";
    case kCertification: return "not_certified";
    default: return "internal_error";
  }
}

void flatten(const json& value, const std::string& path, std::ostream& out) {
  if (value.is_object() && !value.empty()) {
    for (const auto& [key, child] : value.items()) flatten(child, path.empty() ? key : path + "." + key, out);
  } else if (value.is_array() && !value.empty()) {
    for (size_t i = 0; i < value.size(); ++i) flatten(value[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    out << path << " = " << value.dump() << "\n";
  }
}

std::string render(const json& report, const std::string& format) {
  if (format == "text") {
    std::ostringstream out;
    flatten(report, "", out);
    return out.str();
  }
  return report.dump(2) + "\n";
}

json parameters_json(const Options& opt, const std::vector<std::string>& keys) {
  const json all = {{"alpha", opt.alpha},
                    {"blocks", opt.blocks},
                    {"delta", opt.delta},
                    {"epsilon", opt.epsilon},
                    {"epsilon_bar", opt.epsilon_bar},
                    {"gap", opt.gap},
                    {"grid", !opt.no_grid},
                    {"grid_resolution", opt.grid_resolution},
                    {"horizon", opt.horizon},
                    {"max_iters", opt.max_iters},
                    {"move", opt.move},
                    {"n", opt.n},
                    {"op", opt.op},
                    {"q1", opt.q1},
                    {"q2", opt.q2},
                    {"restarts", opt.restarts},
                    {"runs", opt.runs},
                    {"state", opt.state},
                    {"threshold", opt.threshold},
                    {"tol", opt.tol},
                    {"tolerance", opt.tolerance}};
  json out = {{"seed", opt.seed}, {"profile", opt.profile_path.empty() ? json("uniform") : json(opt.profile_path)}};
  for (const std::string& key : keys) out[key] = all.at(key);
  return out;
}

int main_impl(int argc, char** argv) {
  Options opt;
  CLI::App app{"Approximate equilibria of absorbing stochastic games"};
  app.require_subcommand(1);
  std::map<std::string, std::vector<std::string>> echoed;

  const auto add = [&](const std::string& name, const std::string& about, std::vector<std::string> keys) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("game", opt.game_path, "game file (JSON)")->required();
    sub->add_option("--seed", opt.seed, "random seed");
    sub->add_option("-o,--output", opt.output_path, "report file (default stdout)");
    sub->add_option("--format", opt.format, "json or text")->check(CLI::IsMember({"json", "text"}));
    if (name != "validate") sub->add_option("--profile", opt.profile_path, "profile file (default uniform)");
    for (const std::string& key : keys) {
      if (key == "alpha") sub->add_option("--alpha", opt.alpha, "discount of the punishment game");
      if (key == "epsilon") sub->add_option("--epsilon", opt.epsilon, "target accuracy");
      if (key == "epsilon_bar") sub->add_option("--epsilon-bar", opt.epsilon_bar, "no-return threshold");
      if (key == "delta") sub->add_option("--delta", opt.delta, "auxiliary discount or contraction delta");
      if (key == "q1") sub->add_option("--q1", opt.q1, "ordering base factor");
      if (key == "q2") sub->add_option("--q2", opt.q2, "ordering base factor");
      if (key == "tol") sub->add_option("--tol", opt.tol, "solver tolerance of discounted values");
      if (key == "tolerance") sub->add_option("--tolerance", opt.tolerance, "accepted best-reply residual");
      if (key == "threshold") sub->add_option("--threshold", opt.threshold, "rare-move frequency threshold");
      if (key == "max_iters") sub->add_option("--max-iters", opt.max_iters, "iterations per restart");
      if (key == "restarts") sub->add_option("--restarts", opt.restarts, "random restarts");
      if (key == "grid") sub->add_flag("--no-grid", opt.no_grid, "disable the grid fallback");
      if (key == "grid_resolution") sub->add_option("--grid-resolution", opt.grid_resolution, "grid steps");
      if (key == "n") sub->add_option("--n", opt.n, "evaluation-space size (0: number of states)");
      if (key == "runs") sub->add_option("--runs", opt.runs, "Monte Carlo runs");
      if (key == "horizon") sub->add_option("--horizon", opt.horizon, "Monte Carlo horizon (0: certified)");
      if (key == "state") sub->add_option("--state", opt.state, "start state (default first non-absorbing)");
      if (key == "move") sub->add_option("--move", opt.move, "Player Two move (default: the state's mix)");
      if (key == "op") sub->add_option("--op", opt.op, "simplify or contract")->check(CLI::IsMember({"simplify", "contract"}));
      if (key == "blocks") sub->add_option("--blocks", opt.blocks, "blocks as \"s,t;u\" (others singletons)");
      if (key == "gap") sub->add_flag("--gap", opt.gap, "optimal deviation against test-and-punish");
    }
    echoed[name] = std::move(keys);
    sub->callback([&opt, name] { opt.command = name; });
  };
  add("validate", "check a game file", {});
  add("analyze", "taboo-probability tables of the induced chain", {});
  add("solve-zerosum", "punishment values and jump functions", {"alpha", "epsilon", "tol"});
  add("aux-eval", "auxiliary evaluation of Player Two", {"epsilon_bar", "delta", "q1", "q2", "runs", "state", "move",
                                                        "horizon"});
  add("fixed-point", "fixed point of the best-reply map",
      {"alpha", "epsilon_bar", "delta", "q1", "q2", "tol", "tolerance", "max_iters", "restarts", "grid",
       "grid_resolution"});
  add("transform", "simplify a profile or contract its chain", {"op", "threshold", "blocks", "delta"});
  add("verify", "certify a profile as an approximate equilibrium", {"epsilon", "alpha", "tol", "n", "gap"});
  add("simulate", "play the test-and-punish strategies", {"epsilon", "runs", "state"});
  opt.runs = 10000;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }
  // aux-eval runs no Monte Carlo unless asked.
  if (opt.command == "aux-eval" && !app.get_subcommand("aux-eval")->count("--runs")) opt.runs = 0;

  json report = {{"schema", kSchema}, {"command", opt.command}, {"parameters", parameters_json(opt, echoed[opt.command])}};
  json result = json::object();
  int code = kInternal;
  try {
    code = dispatch(opt, result);
    report["result"] = result;
  } catch (const ParseError& e) {
    code = kParse;
    report["error"] = {{"location", e.location()}, {"message", e.what()}};
  } catch (const InvalidGame& e) {
    code = kValidation;
    report["error"] = {{"message", "game failed validation"}, {"validation", e.report}};
  } catch (const NonAbsorbingChainError& e) {
    code = kValidation;
    json trapped = json::array();
    for (StateId s : e.trapped_class()) trapped.push_back(s);
    report["error"] = {{"message", e.what()}, {"trapped", trapped}};
  } catch (const std::invalid_argument& e) {
    code = kValidation;
    report["error"] = {{"message", e.what()}};
  } catch (const std::exception& e) {
    code = kInternal;
    report["error"] = {{"message", e.what()}};
  }
  report["status"] = status_name(code);
  report["exit_code"] = code;
  if (report.contains("error")) std::cerr << "absorb_eq: " << report["error"]["message"].get<std::string>() << "\n";

  const std::string text = render(report, opt.format);
  if (opt.output_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(opt.output_path, std::ios::binary);
    if (!out || !(out << text)) {
      std::cerr << "absorb_eq: cannot write " << opt.output_path << "\n";
      return kInternal;
    }
  }
  return code;
}

}  // namespace
}  // namespace absorb_eq

int main(int argc, char** argv) { return absorb_eq::main_impl(argc, argv); }
