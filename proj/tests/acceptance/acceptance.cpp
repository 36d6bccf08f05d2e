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

// Acceptance run: one line per criterion with the measured quantity, the
// bound it was checked against and the runtime against its limit. Exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "absorb_eq/aux_eval.hpp"
#include "absorb_eq/chain_engine.hpp"
#include "absorb_eq/fixed_point.hpp"
#include "absorb_eq/game_io.hpp"
#include "absorb_eq/transforms.hpp"
#include "absorb_eq/verifier.hpp"
#include "absorb_eq/zerosum.hpp"
#include "support/fixtures.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

namespace absorb_eq {
namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

bool run(int id, const char* title, double limit_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = seconds < limit_seconds;
  const bool passed = out.passed && in_time;
  std::printf("criterion %d [%s]: %s  %s  (%.2f s, limit %.0f s%s)\n", id, title, passed ? "PASS" : "FAIL",
              out.detail.c_str(), seconds, limit_seconds, in_time ? "" : ", over time");
  std::fflush(stdout);
  return passed;
}

Eigen::VectorXd random_boundary(std::mt19937_64& rng, const Chain& chain) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(chain.size());
  for (StateId s : chain.absorbing_states()) b(s) = unit(rng);
  return b;
}

// 1. Identities of the taboo calculus.
Outcome taboo_identities() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> transient(1, 6);
  double worst = 0.0;
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int nt = transient(rng);
    const int na = std::uniform_int_distribution<int>(1, 8 - nt)(rng);
    const Chain chain = testing::random_absorbing_chain(rng, nt, na);
    const IdentityReport rep = check_taboo_identities(ChainAnalysis(chain));
    worst = std::max({worst, rep.escape_identity, rep.escape_identity_alt, rep.rate_identity, rep.escape_bounds, rep.composition, rep.metric});
    if (!rep.holds(1e-9)) ++failures;
  }
  return {failures == 0, fmt("200 chains (n <= 8), worst residual %.2e <= 1e-9, %g failures", worst, failures)};
}

// 2. Exact quantities against path enumeration to horizon 64.
Outcome oracle_equivalence() {
  struct Named {
    const char* name;
    Chain chain;
    Eigen::VectorXd boundary;
  };
  const GameSpec g1 = testing::game_g1();
  Eigen::VectorXd g2_boundary = Eigen::VectorXd::Zero(4);
  g2_boundary(2) = 1.0;
  g2_boundary(3) = -0.5;
  const std::vector<Named> fixtures = {{"G1", induce_chain(g1, uniform_profile(g1)), g1.payoff2()},
                                       {"G2", testing::chain_g2(), g2_boundary}};
  int compared = 0, failures = 0;
  double max_tail = 0.0;
  const auto bracket = [&](double exact, const testing::HorizonEstimate& h, bool complement) {
    const double lo = complement ? 1.0 - h.value - h.tail : h.value;
    const double hi = complement ? 1.0 - h.value : h.value + h.tail;
    ++compared;
    max_tail = std::max(max_tail, h.tail);
    if (exact < lo - 1e-12 || exact > hi + 1e-12) ++failures;
  };
  for (const Named& f : fixtures) {
    const ChainAnalysis analysis(f.chain);
    const int n = f.chain.size();
    const Eigen::MatrixXd& kernel = f.chain.kernel();
    // Every disjoint (taboo, target) with a non-empty target.
    for (int code = 0; code < static_cast<int>(std::pow(3, n)); ++code) {
      StateSet taboo, target;
      for (int s = 0, c = code; s < n; ++s, c /= 3) {
        if (c % 3 == 1) taboo.push_back(s);
        if (c % 3 == 2) target.push_back(s);
      }
      if (target.empty()) continue;
      for (StateId s = 0; s < n; ++s) {
        bracket(taboo_probability(analysis, s, taboo, target), testing::horizon_taboo(kernel, s, taboo, target, 64),
                false);
      }
    }
    for (StateId t = 0; t < n; ++t) {
      for (StateId s = 0; s < n; ++s) {
        if (s != t) bracket(analysis.esc(t, s), testing::horizon_taboo(kernel, t, {}, {s}, 64), true);
      }
      bracket(analysis.absorption_rate(t), testing::horizon_taboo(kernel, t, {}, {t}, 64), true);
    }
    const Eigen::VectorXd harmonic = harmonic_payoffs(f.chain, f.boundary);
    for (StateId s = 0; s < n; ++s) {
      bracket(harmonic(s), testing::horizon_payoff(kernel, f.chain.absorbing_flags(), f.boundary, s, 64), false);
    }
  }
  return {failures == 0,
          fmt("%g comparisons on G1/G2 inside [paths, paths + tail], max tail %.1e, %g failures", compared, max_tail,
              failures)};
}

// 3. Chain-transform bounds on random admissible instances.
Outcome transform_bounds() {
  std::mt19937_64 rng(1003);
  int part = 0, removal = 0, perturb = 0, contraction = 0, exits = 0, replace = 0, inadmissible = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const testing::PartReplacementInstance a = testing::random_part_replacement(rng);
    const RemovalReport ra = check_part_replacement(a.chain, a.s, a.t, a.target, a.avoid, a.part);
    inadmissible += !ra.hypotheses_hold;
    part += !ra.conclusions_hold();

    const testing::FrequencyRemovalInstance b = testing::random_frequency_removal(rng);
    const RemovalReport rb = check_frequency_removal(b.chain, b.taboo, b.target, b.removed, b.gamma);
    inadmissible += !rb.hypotheses_hold;
    removal += !rb.conclusions_hold();

    const testing::PerturbationInstance c = testing::random_perturbation(rng);
    const PerturbationReport rc = relative_perturbation_bound(c.chain, c.perturbed, c.changed, c.gamma, c.boundary);
    inadmissible += !rc.hypotheses_hold;
    perturb += !rc.holds;

    const testing::BlockInstance d = testing::random_block_chain(rng, 0.02);
    const ContractionResult result = contract(d.chain, d.exits);
    const double delta = std::max(result.exit_avoidance_gap, 1e-6);
    const ContractionReport rd = check_contraction(d.chain, result, delta, d.boundary);
    inadmissible += !rd.hypotheses_hold || delta > 0.02 || result.non_singleton_blocks > 3;
    contraction += !rd.holds;
    bool exit_ok = true;
    for (StateId t : d.chain.non_absorbing_states()) {
      const ExitStatistics st =
          exit_statistics_compare(d.chain, result, part_from_mass(t, result.exit_mass[t]), delta, d.boundary);
      exit_ok = exit_ok && st.holds();
    }
    exits += !exit_ok;

    const testing::ReplacementInstance e = testing::random_replacement(rng);
    replace += !replace_transition(e.chain, e.t, e.mode, e.epsilon, e.part, e.replacement, e.lambda).holds;
  }
  const int violations = part + removal + perturb + contraction + exits + replace;
  std::ostringstream detail;
  detail << "50 instances per transform; violations: part replacement " << part << ", frequency removal " << removal
         << ", perturbation " << perturb << ", contraction " << contraction << ", exit statistics " << exits
         << ", transition replacement " << replace << "; inadmissible " << inadmissible;
  return {violations == 0 && inadmissible == 0, detail.str()};
}

// 4. Polarization end to end.
Outcome polarization() {
  std::mt19937_64 rng(1004);
  double dev = 0.0, lambda = 0.0;
  int failures = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const testing::PolarizationInstance in = testing::random_polarization(rng, 1 + trial % 3);
    const PolarizationReport rep =
        polarize(in.chain, in.boundary1, in.boundary2, in.parts, in.epsilon, in.delta, in.gamma).report;
    dev = std::max({dev, rep.deviation1 / in.epsilon, rep.deviation2 / in.epsilon});
    lambda = std::max(lambda, rep.lambda_residual);
    if (!rep.hypotheses_hold || !rep.holds || rep.deviation1 > in.epsilon || rep.deviation2 > in.epsilon ||
        rep.lambda_residual > 1e-9) {
      ++failures;
    }
  }
  return {failures == 0, fmt("50 instances (N <= 3), max |r_T - r| / epsilon = %.3f <= 1, max lambda residual "
                             "%.1e <= 1e-9, %g failures",
                             dev, lambda, failures)};
}

// 5. Auxiliary evaluation: identities on random profiles, Monte Carlo on G1.
Outcome auxiliary_machinery() {
  std::mt19937_64 rng(1005);
  double worst = 0.0, oracle_gap = 0.0;
  int profiles = 0, failures = 0;
  while (profiles < 200) {
    const GameSpec game = testing::random_game(rng, 3, 2, 3);
    StrategyProfile profile = uniform_profile(game);
    for (StateId s : game.non_absorbing_states()) {
      profile.x[s] = testing::random_distribution(rng, game.state(s).num_p1());
      profile.y[s] = testing::random_distribution(rng, game.state(s).num_p2());
    }
    if (!is_absorbing_chain(induce_chain(game, profile))) continue;
    const AuxParams params = make_aux_params(0.1, 0.05, 2.0, 2.0, 3);
    const AuxEvaluation eval = auxiliary_values(game, profile, params);
    const double r = std::max({eval.identity_residual, eval.consistency_residual, eval.r2_residual});
    worst = std::max(worst, r);
    if (r > 1e-9) ++failures;
    if (profiles < 20) {
      for (StateId s : game.non_absorbing_states()) {
        std::vector<double> escape_factor;
        for (const MoveEvaluation& m : eval.moves[s]) escape_factor.push_back(m.escape_factor);
        const double keep = 1.0 - params.delta / eval.order_weight(s);
        const testing::HorizonEstimate h = testing::horizon_auxiliary(game, profile, s, -1, escape_factor, keep, 4000);
        const double gap = std::abs(eval.aux_value(s) - h.value) - h.tail;
        oracle_gap = std::max(oracle_gap, gap);
        if (gap > 1e-9) ++failures;
      }
    }
    ++profiles;
  }

  // G1 with y = (1/2, 1/2) and delta = 0.1: the waiting move is worth 0.9/1.1.
  const GameSpec g1 = testing::game_g1();
  const StrategyProfile half = uniform_profile(g1);
  const AuxEvaluation eval = auxiliary_values(g1, half, make_aux_params(0.1, 0.1, 2.0, 2.0, 1));
  const double closed = 0.9 / 1.1;
  if (std::abs(eval.moves[0][1].aux_value - closed) > 1e-12) ++failures;
  int inside = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const MonteCarloEstimate mc = auxiliary_monte_carlo(g1, half, eval, 0, 1, 100000, 5000 + rep);
    inside += std::abs(mc.estimate - closed) <= mc.halfwidth;
  }
  std::ostringstream detail;
  detail << "200 random profiles, worst identity residual " << fmt("%.1e", worst)
         << " <= 1e-9, path-oracle excess " << fmt("%.1e", oracle_gap) << "; G1 Monte Carlo (1e5 runs) inside 99% CI in "
         << inside << "/100 >= 97";
  return {failures == 0 && inside >= 97, detail.str()};
}

// 6. Martingale bounds.
Outcome martingale_bounds() {
  std::mt19937_64 rng(1006);
  int variation_fail = 0;
  double ratio = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Chain chain = testing::random_absorbing_chain(rng, 2 + trial % 5, 2);
    const VariationSumReport rep = variation_sum_check(chain, random_boundary(rng, chain), 0, 5000, 600 + trial);
    if (!rep.holds) ++variation_fail;
    if (rep.bound > 0) ratio = std::max(ratio, (rep.estimate - 3 * rep.stddev / std::sqrt(5000.0)) / rep.bound);
  }

  const double epsilon = 0.1;
  int admissible_fail = 0;
  double worst_high = 0.0;
  std::vector<PartialSumReport> reports;
  // Lazy walk on 0..4: edges step/4 and budget epsilon^3 / 5.
  const double step = 4.0 * std::pow(epsilon, 3) / 5.0;
  reports.push_back(partial_sum_check(random_walk_chain(4, step), 2, step / 4.0, epsilon, 10000, 61));
  // Fixed points of the fixtures: every used move keeps the value.
  for (const auto& [game, profile] :
       {std::pair{testing::game_g1(), std::vector<std::vector<int>>{{0, 0}, {0, 0}}},
        std::pair{testing::game_g2_choice(), std::vector<std::vector<int>>{{0, 0, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}}}}) {
    const StrategyProfile p = pure_profile(game, profile[0], profile[1]);
    for (int player : {1, 2}) {
      const TwoLayerChain chain = two_layer_from_profile(game, p, player);
      const Eigen::VectorXd v = two_layer_values(chain);
      const double m = std::max(v.maxCoeff() - v.minCoeff(), 1e-12);
      const double delta = std::pow(epsilon, 3) / (m * chain.size());
      reports.push_back(partial_sum_check(chain, 0, delta, epsilon, 10000, 62 + player));
    }
  }
  for (const PartialSumReport& r : reports) {
    if (!r.admissible || !r.holds) ++admissible_fail;
    worst_high = std::max(worst_high, r.high);
  }

  // Walk on 0..1000 with the per-stage bound 1/n = epsilon^3: admissible
  // except for the missing 1/n factor.
  const PartialSumReport walk = partial_sum_check(random_walk_chain(1000), 500, std::pow(epsilon, 3), epsilon, 500, 66);
  const bool violates = walk.edges_within_delta && !walk.admissible && walk.low > epsilon;

  std::ostringstream detail;
  detail << "variation sum: 50 chains, " << variation_fail << " failures (max (mean - 3 sd) / Mn = " << fmt("%.3f", ratio)
         << "); partial sums: " << reports.size() << " admissible fixtures, max 99% upper bound " << fmt("%.4f", worst_high)
         << " <= 0.1; walk n = 1000, delta = 1e-3: p = " << fmt("%.3f", walk.probability) << " in ["
         << fmt("%.3f", walk.low) << ", " << fmt("%.3f", walk.high) << "] > 0.1" << (violates ? " (violates)" : "");
  return {variation_fail == 0 && admissible_fail == 0 && violates, detail.str()};
}

// 7. Fixed point, diagnosis and certification on the fixtures.
Outcome fixed_point_certification() {
  const double epsilon = 0.1;
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, game] : {std::pair{"G1", testing::game_g1()}, std::pair{"G2", testing::game_g2_choice()}}) {
    const ZeroSumTables discounted = discounted_values(game, 0.01, 1e-12);
    const AuxParams params =
        make_aux_params(0.1, 0.001, 2.0, 2.0, static_cast<int>(game.non_absorbing_states().size()));
    const FixedPointCandidate fp = find_fixed_point(game, discounted, params);
    const CandidateDiagnosis diag = diagnose_candidate(game, fp.profile, discounted, params);
    bool checks_ac = true;
    std::ostringstream margins;
    for (size_t k = 0; k < diag.checks.size(); ++k) {
      const DiagnosticCheck& c = diag.checks[k];
      if (k < 3) checks_ac = checks_ac && c.evaluated && c.passed;
      margins << " " << static_cast<char>('a' + k) << "=" << (c.vacuous ? std::string("vacuous") : fmt("%.3g", c.margin));
    }
    const ZeroSumTables tables = zero_sum_tables(game, 0.01, epsilon);
    const Certificate cert = certify_profile(game, fp.profile, epsilon, tables);
    const GapReport gaps = test_and_punish_gap(game, fp.profile, epsilon, tables);
    const bool pass = fp.residual <= 1e-6 && checks_ac && cert.certified && gaps.max_gap <= 4 * epsilon;
    ok = ok && pass;
    detail << name << ": residual " << fmt("%.1e", fp.residual) << ", checks" << margins.str() << ", regime "
           << (diag.regime.within_constants ? "within constants" : "outside constants") << ", certified " << (cert.certified ? "yes" : "no")
           << " (delta " << fmt("%.1e", cert.delta_used) << " <= " << fmt("%.1e", cert.delta_budget) << "), gap "
           << fmt("%.3f", gaps.max_gap) << " <= 0.4; ";
  }
  return {ok, detail.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// 8. Byte-identical CLI reports.
Outcome cli_determinism() {
  const std::string cli = ABSORB_EQ_CLI;
  const std::string fixtures = ABSORB_EQ_FIXTURE_DIR;
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "absorb_eq_acceptance";
  std::filesystem::create_directories(dir);
  const std::string g1 = fixtures + "/g1.json", g2 = fixtures + "/g2_choice.json";
  const std::vector<std::string> commands = {
      "validate " + g1,
      "analyze " + g2,
      "solve-zerosum " + g2 + " --profile " + fixtures + "/g2_choice_profile.json",
      "aux-eval " + g1 + " --runs 20000 --move b2 --seed 11",
      "fixed-point " + fixtures + "/pennies_skew.json --max-iters 50 --restarts 4 --seed 12",
      "transform " + g2 + " --op contract --blocks s,t",
      "verify " + g2 + " --profile " + fixtures + "/g2_choice_profile.json --gap",
      "simulate " + g2 + " --runs 20000 --seed 13",
      "simulate " + g2 + " --runs 20000 --seed 13 --format text"};
  int differing = 0, failed = 0;
  for (size_t k = 0; k < commands.size(); ++k) {
    std::string outputs[2];
    for (int round = 0; round < 2; ++round) {
      const std::string path = (dir / ("report_" + std::to_string(k) + "_" + std::to_string(round))).string();
      const int status = std::system((cli + " " + commands[k] + " -o " + path + " 2>/dev/null").c_str());
      if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) == 1) ++failed;
      outputs[round] = slurp(path);
    }
    if (outputs[0].empty() || outputs[0] != outputs[1]) ++differing;
  }
  std::filesystem::remove_all(dir);
  return {differing == 0 && failed == 0,
          fmt("%g commands run twice, %g reports differ, %g internal errors", static_cast<double>(commands.size()),
              differing, failed)};
}

}  // namespace
}  // namespace absorb_eq

int main() {
  using namespace absorb_eq;
  int failed = 0;
  failed += !run(1, "taboo identities", 10, taboo_identities);
  failed += !run(2, "oracle equivalence", 5, oracle_equivalence);
  failed += !run(3, "transform bounds", 60, transform_bounds);
  failed += !run(4, "polarization", 10, polarization);
  failed += !run(5, "auxiliary evaluation", 60, auxiliary_machinery);
  failed += !run(6, "martingale bounds", 120, martingale_bounds);
  failed += !run(7, "fixed point and certificate", 120, fixed_point_certification);
  failed += !run(8, "CLI determinism", 120, cli_determinism);
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
