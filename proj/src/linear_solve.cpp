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

#include "linear_solve.hpp"

#include <deque>

namespace absorb_eq::detail {

namespace {

constexpr double kRefineThreshold = 1e-10;

Eigen::MatrixXd lu_solve(const Eigen::MatrixXd& system, const Eigen::MatrixXd& rhs) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  Eigen::MatrixXd x = lu.solve(rhs);
  Eigen::MatrixXd residual = rhs - system * x;
  if (residual.size() > 0 && residual.cwiseAbs().maxCoeff() > kRefineThreshold) {
    x += lu.solve(residual);
  }
  return x;
}

}  // namespace

std::vector<bool> reachable_from(const Eigen::MatrixXd& kernel, int from, const std::vector<bool>& blocked) {
  const int n = static_cast<int>(kernel.rows());
  std::vector<bool> seen(n, false);
  std::deque<int> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < n; ++v) {
      if (kernel(u, v) > 0.0 && !seen[v] && !blocked[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
  return seen;
}

std::vector<bool> can_reach(const Eigen::MatrixXd& kernel, const std::vector<bool>& targets,
                            const std::vector<bool>& blocked) {
  const int n = static_cast<int>(kernel.rows());
  std::vector<bool> reach(targets);
  std::deque<int> queue;
  for (int v = 0; v < n; ++v) {
    if (targets[v]) queue.push_back(v);
  }
  // Backward search over predecessors that are not blocked.
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int u = 0; u < n; ++u) {
      if (!reach[u] && !blocked[u] && kernel(u, v) > 0.0) {
        reach[u] = true;
        queue.push_back(u);
      }
    }
  }
  return reach;
}

Eigen::VectorXd solve_fixed_boundary(const Eigen::MatrixXd& kernel, const std::vector<bool>& fixed,
                                     const Eigen::VectorXd& value) {
  const int n = static_cast<int>(kernel.rows());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    if (fixed[v]) h(v) = value(v);
  }
  std::vector<bool> reach = can_reach(kernel, fixed, fixed);
  std::vector<int> live;
  for (int u = 0; u < n; ++u) {
    if (!fixed[u] && reach[u]) live.push_back(u);
  }
  if (live.empty()) return h;

  const int m = static_cast<int>(live.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const int u = live[i];
    for (int j = 0; j < m; ++j) system(i, j) -= kernel(u, live[j]);
    for (int v = 0; v < n; ++v) {
      if (fixed[v]) rhs(i) += kernel(u, v) * value(v);
    }
  }
  Eigen::VectorXd sol = lu_solve(system, rhs);
  for (int i = 0; i < m; ++i) h(live[i]) = sol(i);
  return h;
}

Eigen::MatrixXd solve_transient(const Eigen::MatrixXd& kernel, const std::vector<int>& subset,
                                const Eigen::MatrixXd& rhs) {
  const int m = static_cast<int>(subset.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) system(i, j) -= kernel(subset[i], subset[j]);
  }
  return lu_solve(system, rhs);
}

}  // namespace absorb_eq::detail
