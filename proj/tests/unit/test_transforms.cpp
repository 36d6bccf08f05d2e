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

#include <cmath>
#include <random>

#include "absorb_eq/transforms.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

namespace absorb_eq {
namespace {

constexpr StateId kS = 0, kT = 1, kAs = 2, kAt = 3;

void check_stochastic(const Chain& chain) {
  for (StateId s = 0; s < chain.size(); ++s) {
    CHECK(std::abs(chain.row(s).sum() - 1.0) <= 1e-12);
    CHECK(chain.row(s).minCoeff() >= 0.0);
  }
}

Eigen::VectorXd g2_boundary() {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(4);
  r(kAt) = 1.0;
  return r;
}

Eigen::VectorXd unit_vector(int n, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(i) = 1.0;
  return v;
}

TEST_SUITE("transforms") {

TEST_CASE("simplify with no removals is the identity") {
  const GameSpec game = testing::game_g1();
  const StrategyProfile profile = uniform_profile(game);
  const ProfileSimplification out = simplify(game, profile, {});
  for (StateId s = 0; s < game.num_states(); ++s) {
    CHECK(out.profile.x[s] == profile.x[s]);
    CHECK(out.profile.y[s] == profile.y[s]);
  }
  const Chain chain = testing::chain_g2();
  const ChainSimplification same = simplify(chain, {});
  CHECK(same.chain.kernel() == chain.kernel());
}

TEST_CASE("removing the waiting move in G1 leaves pure absorption") {
  const GameSpec game = testing::game_g1();
  const ProfileSimplification out = simplify(game, uniform_profile(game), {{0, 2, 1}});
  CHECK(out.profile.y[0](0) == 1.0);
  CHECK(out.profile.y[0](1) == 0.0);
  CHECK(out.removed_p2[0] == doctest::Approx(0.5));
  const Chain chain = induce_chain(game, out.profile);
  CHECK(chain.q(0, 1) == 1.0);
  CHECK_THROWS_AS(simplify(game, out.profile, {{0, 2, 0}}), std::invalid_argument);
  const std::vector<MoveRemoval> rare = rare_moves(game, out.profile, 0.6);
  CHECK(rare.empty());
  CHECK(rare_moves(game, uniform_profile(game), 0.6).size() == 2);
}

TEST_CASE("chain simplification renormalizes the surviving parts") {
  const GameSpec game = testing::game_g2_choice();
  StrategyProfile profile = uniform_profile(game);
  profile.y[kS] << 0.75, 0.25;
  const Chain chain = induce_chain(game, profile);
  const ChainSimplification out = simplify(chain, {{kS, {1}}});
  CHECK(out.removed[kS] == doctest::Approx(0.25));
  CHECK(out.chain.q(kS, kT) == doctest::Approx(0.5));
  CHECK(out.chain.q(kS, kAs) == doctest::Approx(0.5));
  check_stochastic(out.chain);
  CHECK_THROWS_AS(simplify(chain, {{kS, {0, 1}}}), std::invalid_argument);
}

TEST_CASE("empty removal set keeps every factor at one") {
  const Chain chain = testing::chain_g2();
  const RemovalReport report = check_frequency_removal(chain, {}, {kAs, kAt}, {}, 0.1);
  CHECK(report.hypotheses_hold);
  for (const BoundCheck& c : report.checks) CHECK(c.lhs == doctest::Approx(c.rhs).epsilon(1e-14));
}

TEST_CASE("G2 with a quarter of P^t(t,s) removed at t") {
  const Chain chain = testing::chain_g2();
  Eigen::VectorXd removed = Eigen::VectorXd::Zero(4);
  removed(kS) = 0.25 * taboo_probability(chain, kT, {kT}, {kS});
  const RemovalReport report = check_frequency_removal(chain, {}, {kAs, kAt}, {{kT, removed}}, 0.25);
  CHECK(report.hypotheses_hold);
  CHECK(report.conclusions_hold());
  // Hand solve: t keeps 3/8 to s and 1/2 to A_t out of 7/8.
  const Chain after = remove_mass(chain, kT, removed);
  const double exact = 0.5 + 0.5 * (4.0 / 7.0);
  CHECK(taboo_probability(after, kS, {kS}, {kAs, kAt}) == doctest::Approx(exact).epsilon(1e-12));
  const testing::HorizonEstimate h = testing::horizon_taboo(after.kernel(), kS, {kS}, {kAs, kAt}, 64);
  CHECK(exact >= h.value - 1e-12);
  CHECK(exact <= h.value + h.tail + 1e-12);
  CHECK(exact >= 0.75 * taboo_probability(chain, kS, {kS}, {kAs, kAt}));
}

TEST_CASE("removal above the allowance is reported") {
  const Chain chain = testing::chain_g2();
  Eigen::VectorXd removed = Eigen::VectorXd::Zero(4);
  removed(kS) = 0.4;
  const RemovalReport report = check_frequency_removal(chain, {}, {kAs, kAt}, {{kT, removed}}, 0.25);
  CHECK_FALSE(report.hypotheses_hold);
  CHECK_FALSE(report.hypothesis_failures.empty());
}

TEST_CASE("part replacement keeps the share through the part") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const testing::PartReplacementInstance in = testing::random_part_replacement(rng);
    const RemovalReport report = check_part_replacement(in.chain, in.s, in.t, in.target, in.avoid, in.part);
    CHECK(report.hypotheses_hold);
    CHECK(report.conclusions_hold());
  }
}

TEST_CASE("frequency removal bounds on random six-state chains") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const testing::FrequencyRemovalInstance in = testing::random_frequency_removal(rng);
    const RemovalReport report = check_frequency_removal(in.chain, in.taboo, in.target, in.removed, in.gamma);
    CHECK(report.hypotheses_hold);
    CHECK(report.conclusions_hold());
    CHECK(report.worst_margin() <= 1e-9);
  }
}

TEST_CASE("reachability survives rare removals") {
  std::mt19937_64 rng(33);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Chain chain = testing::random_absorbing_chain(rng, 4, 2, 0.8);
    const StateId s = 0;
    std::map<StateId, Part> removed;
    double gamma = 0.0;
    for (StateId t = 1; t < 4; ++t) {
      const double base = taboo_probability(chain, t, {t}, {s});
      if (base <= 0.0) continue;
      Eigen::VectorXd mass = 0.1 * chain.row(t);
      mass(s) = 0.0;
      if (!(mass.sum() > 0.0)) continue;
      const Part part = part_from_mass(t, mass);
      removed[t] = part;
      gamma = std::max(gamma, part.frequency * taboo_probability(chain.with_row(t, part.row), t, {t}, {s}) / base);
    }
    if (removed.empty() || removed.size() * gamma >= 1.0) continue;
    const RemovalReport report = check_reachability_survival(chain, s, removed, gamma);
    CHECK(report.hypotheses_hold);
    CHECK(report.conclusions_hold());
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("game removal keeps motion inside the region") {
  const GameSpec game = testing::game_g2_choice();
  StrategyProfile profile = uniform_profile(game);
  profile.y[kS] << 0.9, 0.1;
  profile.y[kT] << 0.9, 0.1;
  GameRemovals stop_moves;
  stop_moves.p2_removed[kS] = Eigen::Vector2d(0.0, 0.1);
  stop_moves.p2_removed[kT] = Eigen::Vector2d(0.0, 0.1);
  const RemovalReport ok = check_game_removal(game, profile, {kS, kT}, {kS, kT}, kS, kT, stop_moves, 0.01, 0.01, 1.0);
  CHECK(ok.hypotheses_hold);
  CHECK(ok.conclusions_hold());

  GameRemovals walk_moves;
  walk_moves.p2_removed[kS] = Eigen::Vector2d(0.9, 0.0);
  const RemovalReport bad = check_game_removal(game, profile, {kS, kT}, {kS, kT}, kS, kT, walk_moves, 0.01, 0.01, 1.0);
  CHECK_FALSE(bad.hypotheses_hold);
  CHECK_FALSE(bad.conclusions_hold());
}

TEST_CASE("identical chains are not perturbed") {
  const Chain chain = testing::chain_g2();
  const PerturbationReport report = relative_perturbation_bound(chain, chain, {kS}, 0.0, g2_boundary());
  CHECK(report.max_taboo_factor == 0.0);
  CHECK(report.max_harmonic_gap == 0.0);
  CHECK(report.holds);
}

TEST_CASE("G2 with one entry scaled by one percent") {
  const Chain chain = testing::chain_g2();
  for (double scale : {1.01, 0.99}) {
    Eigen::VectorXd row = chain.row(kS);
    row(kT) *= scale;
    const Chain perturbed = chain.with_row(kS, row / row.sum());
    const PerturbationReport report = relative_perturbation_bound(chain, perturbed, {kS}, 0.01, g2_boundary());
    CHECK(report.hypotheses_hold);
    CHECK(report.max_taboo_factor <= 0.04);
    CHECK(report.max_taboo_factor > 0.0);
    CHECK(report.holds);
    CHECK(report.taboo_pairs == 65);
  }
}

TEST_CASE("perturbations that change the zero pattern are rejected") {
  const Chain chain = testing::chain_g2();
  Eigen::VectorXd row = chain.row(kS);
  row(kAt) = 0.1;
  CHECK_THROWS_AS(relative_perturbation_bound(chain, chain.with_row(kS, row / row.sum()), {kS}, 0.1, g2_boundary()),
                  std::invalid_argument);
}

TEST_CASE("random relative perturbations stay within 4 gamma |U|") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const testing::PerturbationInstance in = testing::random_perturbation(rng);
    const PerturbationReport report = relative_perturbation_bound(in.chain, in.perturbed, in.changed, in.gamma, in.boundary);
    CHECK(report.hypotheses_hold);
    CHECK(report.holds);
  }
}

TEST_CASE("singleton partition contracts to the same chain") {
  std::mt19937_64 rng(35);
  const Chain chain = testing::random_absorbing_chain(rng, 4, 2);
  std::vector<StateSet> blocks;
  for (StateId s : chain.non_absorbing_states()) blocks.push_back({s});
  const ContractionResult result = contract(chain, default_exits(chain, blocks));
  CHECK(result.non_singleton_blocks == 0);
  CHECK((result.contracted.kernel() - chain.kernel()).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::VectorXd boundary = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
  const ContractionReport report = check_contraction(chain, result, 0.0, boundary);
  CHECK(report.taboo_factor_from_b <= 1e-12);
  CHECK(report.taboo_factor_from_a <= 1e-12);
  CHECK(report.harmonic_gap <= 1e-12);
  CHECK(report.holds);
  check_stochastic(result.extended);
  check_stochastic(result.contracted);
  for (StateId t : chain.non_absorbing_states()) {
    const Part exit = part_from_mass(t, result.exit_mass[t]);
    const ExitStatistics st = exit_statistics_compare(chain, result, exit, 0.0, boundary);
    CHECK(st.g_contracted == doctest::Approx(st.g).epsilon(1e-12));
    CHECK(st.importance_contracted == doctest::Approx(st.importance).epsilon(1e-12));
    CHECK(st.holds());
  }
}

TEST_CASE("G2 as one block contracts to its absorbing value") {
  const Chain chain = testing::chain_g2();
  const ExitSystem exits = default_exits(chain, {{kS, kT}});
  const ContractionResult result = contract(chain, exits);
  REQUIRE(result.contracted.size() == 3);
  // Hand solve: x = 1/2 * 0 + 1/2 (1/2 * 1 + 1/2 x) gives x = 1/3.
  const Eigen::VectorXd r = ChainAnalysis(result.contracted).harmonic(Eigen::Vector3d(0.0, 0.0, 1.0));
  CHECK(r(result.contracted_index[kS]) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(result.exit_avoidance_gap == doctest::Approx(0.5));
  const ContractionReport report = check_contraction(chain, result, 0.5, g2_boundary());
  CHECK(report.representative_gap <= 1e-12);
  CHECK_FALSE(report.hypotheses_hold);
}

TEST_CASE("two-state block with one percent exit per round trip") {
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(4, 4);
  kernel(0, 1) = 0.995;
  kernel(0, 2) = 0.005;
  kernel(1, 0) = 0.995;
  kernel(1, 3) = 0.005;
  kernel(2, 2) = kernel(3, 3) = 1.0;
  const Chain chain(kernel, {false, false, true, true});
  const ContractionResult result = contract(chain, default_exits(chain, {{0, 1}}));
  const Eigen::VectorXd boundary = Eigen::Vector4d(0.0, 0.0, 0.0, 1.0);
  const ContractionReport report = check_contraction(chain, result, 0.01, boundary);
  CHECK(report.hypotheses_hold);
  CHECK(report.harmonic_gap <= 4.0 * 1.0 * 0.01);
  CHECK(report.holds);
  for (StateId t : {0, 1}) {
    const ExitStatistics st = exit_statistics_compare(chain, result, part_from_mass(t, result.exit_mass[t]), 0.01, boundary);
    CHECK(std::abs(st.importance - st.importance_contracted) <= 8.0 * 0.01 + 4.0 * 0.01);
    CHECK(st.holds());
  }
}

TEST_CASE("contraction rejects non-absorbing chains and bad exits") {
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(3, 3);
  kernel(0, 1) = kernel(1, 0) = kernel(2, 2) = 1.0;
  const Chain trapped(kernel, {false, false, true});
  CHECK_THROWS_AS(contract(trapped, default_exits(trapped, {{0, 1}})), NonAbsorbingChainError);
  const Chain chain = testing::chain_g2();
  ExitSystem exits = default_exits(chain, {{kS, kT}});
  exits.exits[kS].clear();
  CHECK_THROWS_AS(contract(chain, exits), std::invalid_argument);
  CHECK_THROWS_AS(contract(chain, default_exits(chain, {{kS}})), std::invalid_argument);
}

TEST_CASE("random block chains satisfy the contraction and exit bounds") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const testing::BlockInstance in = testing::random_block_chain(rng);
    const ContractionResult result = contract(in.chain, in.exits);
    const double delta = std::max(result.exit_avoidance_gap, 1e-6);
    const ContractionReport report = check_contraction(in.chain, result, delta, in.boundary);
    CHECK(report.hypotheses_hold);
    CHECK(report.holds);
    check_stochastic(result.extended);
    check_stochastic(result.contracted);
    for (StateId t : in.chain.non_absorbing_states()) {
      const Part exit = part_from_mass(t, result.exit_mass[t]);
      const ExitStatistics st = exit_statistics_compare(in.chain, result, exit, delta, in.boundary);
      for (const BoundCheck& c : st.checks) CHECK_MESSAGE(c.holds(), c.name, " ", c.lhs, " > ", c.rhs);
    }
  }
}

TEST_CASE("replacing a row by itself keeps absorption rates") {
  const Chain chain = testing::chain_g2();
  const ChainAnalysis analysis(chain);
  const ReplacementResult out = replace_transition(chain, kT, ReplacementMode::kReplacement, analysis.absorption_rate(kT),
                                                   std::nullopt, chain.row(kT));
  CHECK(out.min_rate_ratio == doctest::Approx(1.0));
  CHECK(out.holds);
}

TEST_CASE("G2 with t absorbing at once") {
  const Chain chain = testing::chain_g2();
  const ReplacementResult out =
      replace_transition(chain, kT, ReplacementMode::kReplacement, 1.0, std::nullopt, unit_vector(4, kAt));
  CHECK(ChainAnalysis(out.chain).absorption_rate(kS) == doctest::Approx(1.0));
  CHECK(out.min_rate_ratio == doctest::Approx(1.0 / 0.75));
  CHECK(out.holds);
  CHECK_THROWS_AS(replace_transition(chain, kT, ReplacementMode::kReplacement, 1.0, std::nullopt, unit_vector(4, kS)),
                  std::invalid_argument);
}

TEST_CASE("random replacements over a lambda grid") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    testing::ReplacementInstance in = testing::random_replacement(rng);
    in.mode = ReplacementMode::kConvex;
    const ChainAnalysis analysis(in.chain);
    const double importance = in.part.frequency * analysis.no_return_probability(in.t, in.part.row) / analysis.absorption_rate(in.t);
    const double g = analysis.no_return_probability(in.t, in.replacement);
    const double epsilon = std::min(importance, g);
    if (epsilon < 1e-6) continue;
    for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const ReplacementResult out =
          replace_transition(in.chain, in.t, in.mode, epsilon, in.part, in.replacement, lambda);
      CHECK(out.holds);
      check_stochastic(out.chain);
    }
  }
}

TEST_CASE("polarization without low parts changes nothing") {
  const Chain chain = testing::chain_g2();
  const PolarizationResult out = polarize(chain, g2_boundary(), g2_boundary(), {}, 0.2, 0.05, 0.01);
  CHECK(out.report.polarized.empty());
  CHECK(out.chain.kernel() == chain.kernel());
  CHECK(out.report.deviation1 == 0.0);
}

TEST_CASE("single-state polarization solves for lambda") {
  // s0: 0.4 to lo, 0.3 to hi, 0.3 stay; r2(s0) = 3/7.
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(3, 3);
  kernel(0, 0) = 0.3;
  kernel(0, 1) = 0.4;
  kernel(0, 2) = 0.3;
  kernel(1, 1) = kernel(2, 2) = 1.0;
  const Chain chain(kernel, {false, true, true});
  const Eigen::VectorXd b1 = Eigen::Vector3d(0.0, 0.0, 0.0);
  const Eigen::VectorXd b2 = Eigen::Vector3d(0.0, 0.0, 1.0);
  PolarizationParts parts;
  parts.low_part = Eigen::Vector3d(0.0, 0.4, 0.0);
  parts.alternative = unit_vector(3, 1);
  parts.high_part = Eigen::Vector3d(0.0, 0.0, 0.3);
  const PolarizationResult out = polarize(chain, b1, b2, {{0, parts}}, 0.2, 0.05, 0.01);
  CHECK(out.report.hypotheses_hold);
  REQUIRE(out.report.polarized == StateSet{0});
  // lambda * 0 + (1 - lambda) * 1 = 3/7.
  CHECK(out.report.lambda.at(0) == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
  CHECK(out.chain.q(0, 2) == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
  CHECK(out.report.deviation2 <= 1e-12);
  CHECK(out.report.holds);
}

TEST_CASE("random admissible polarizations stay within epsilon") {
  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 30; ++trial) {
    const int n_states = 1 + trial % 3;
    const testing::PolarizationInstance in = testing::random_polarization(rng, n_states);
    const PolarizationResult out = polarize(in.chain, in.boundary1, in.boundary2, in.parts, in.epsilon, in.delta, in.gamma);
    CHECK(out.report.holds);
    CHECK(out.report.lambda_residual <= 1e-9);
    CHECK(out.report.r2_drift_before_discard <= 1e-9);
    CHECK(out.report.high_part_v1_gap <= in.delta);
    CHECK_FALSE(out.report.within_constants);
    check_stochastic(out.chain);
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace absorb_eq
