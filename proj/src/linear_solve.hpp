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

#ifndef ABSORB_EQ_SRC_LINEAR_SOLVE_HPP_
#define ABSORB_EQ_SRC_LINEAR_SOLVE_HPP_

#include <vector>

#include <Eigen/Dense>

namespace absorb_eq::detail {

// Solves h(u) = sum_v Q(u, v) h(v) for every u with fixed[u] == false,
// where h(v) = value(v) on fixed states. Free states that cannot reach a
// fixed state get h = 0 (they are trapped among free states forever). The
// remaining system is non-singular and is solved by LU with partial
// pivoting, refined once when the residual exceeds 1e-10.
Eigen::VectorXd solve_fixed_boundary(const Eigen::MatrixXd& kernel, const std::vector<bool>& fixed,
                                     const Eigen::VectorXd& value);

// Solves (I - Q_SS) X = B for the index set S, where rows of B are indexed
// like S. Caller guarantees non-singularity.
Eigen::MatrixXd solve_transient(const Eigen::MatrixXd& kernel, const std::vector<int>& subset,
                                const Eigen::MatrixXd& rhs);

// States reachable (in >= 0 steps) from `from` through edges with positive
// probability, never stepping into `blocked` (the start itself may be
// blocked).
std::vector<bool> reachable_from(const Eigen::MatrixXd& kernel, int from, const std::vector<bool>& blocked);

// For each state, whether some state in `targets` is reachable from it in
// >= 0 steps without passing through `blocked` states. Targets count even
// if blocked.
std::vector<bool> can_reach(const Eigen::MatrixXd& kernel, const std::vector<bool>& targets,
                            const std::vector<bool>& blocked);

}  // namespace absorb_eq::detail

#endif  // ABSORB_EQ_SRC_LINEAR_SOLVE_HPP_
