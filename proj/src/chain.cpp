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

#include "absorb_eq/chain.hpp"

#include <cmath>
#include <stdexcept>

namespace absorb_eq {

Part part_from_mass(StateId host, const Eigen::VectorXd& mass, std::string label) {
  Part part;
  part.host = host;
  part.label = std::move(label);
  part.frequency = mass.sum();
  if (part.frequency > 0.0) {
    part.row = mass / part.frequency;
  } else {
    part.frequency = 0.0;
    part.row = Eigen::VectorXd::Zero(mass.size());
    part.row(host) = 1.0;
  }
  return part;
}

Chain::Chain(Eigen::MatrixXd kernel, std::vector<bool> absorbing, std::vector<std::string> names,
             std::vector<std::vector<Part>> parts)
    : kernel_(std::move(kernel)), absorbing_(std::move(absorbing)), names_(std::move(names)), parts_(std::move(parts)) {
  const int n = static_cast<int>(kernel_.rows());
  if (kernel_.cols() != n) throw std::invalid_argument("chain kernel is not square");
  if (static_cast<int>(absorbing_.size()) != n) throw std::invalid_argument("absorbing flags do not match kernel");
  if (names_.empty()) {
    for (int s = 0; s < n; ++s) names_.push_back("s" + std::to_string(s));
  }
  if (static_cast<int>(names_.size()) != n) throw std::invalid_argument("state names do not match kernel");
  for (int s = 0; s < n; ++s) {
    if ((kernel_.row(s).array() < 0.0).any()) {
      throw std::invalid_argument("negative transition probability at " + names_[s]);
    }
    const double total = kernel_.row(s).sum();
    if (std::abs(total - 1.0) > kStochasticTolerance) {
      throw std::invalid_argument("row not stochastic at " + names_[s]);
    }
    kernel_.row(s) /= total;
    if (absorbing_[s] && std::abs(kernel_(s, s) - 1.0) > kStochasticTolerance) {
      throw std::invalid_argument("absorbing state " + names_[s] + " does not self-loop");
    }
  }
  if (parts_.empty()) parts_.resize(n);
  if (static_cast<int>(parts_.size()) != n) throw std::invalid_argument("part lists do not match kernel");
  for (int s = 0; s < n; ++s) {
    if (parts_[s].empty()) {
      parts_[s].push_back(part_from_mass(s, row(s), "row"));
      continue;
    }
    double total = 0.0;
    for (const Part& p : parts_[s]) {
      if (p.frequency < -kStochasticTolerance || p.frequency > 1.0 + kStochasticTolerance) {
        throw std::invalid_argument("part frequency outside [0,1] at " + names_[s]);
      }
      total += p.frequency;
    }
    if (std::abs(total - 1.0) > kStochasticTolerance) {
      throw std::invalid_argument("part frequencies do not sum to one at " + names_[s]);
    }
  }
}

std::vector<StateId> Chain::absorbing_states() const {
  std::vector<StateId> out;
  for (int s = 0; s < size(); ++s) {
    if (absorbing_[s]) out.push_back(s);
  }
  return out;
}

std::vector<StateId> Chain::non_absorbing_states() const {
  std::vector<StateId> out;
  for (int s = 0; s < size(); ++s) {
    if (!absorbing_[s]) out.push_back(s);
  }
  return out;
}

Chain Chain::with_row(StateId s, const Eigen::VectorXd& row) const {
  Eigen::MatrixXd kernel = kernel_;
  kernel.row(s) = row.transpose();
  std::vector<std::vector<Part>> parts = parts_;
  parts[s] = {part_from_mass(s, row, "row")};
  return Chain(std::move(kernel), absorbing_, names_, std::move(parts));
}

Chain Chain::with_parts(StateId s, std::vector<Part> parts) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(size());
  for (const Part& p : parts) row += p.mass();
  Eigen::MatrixXd kernel = kernel_;
  kernel.row(s) = row.transpose();
  std::vector<std::vector<Part>> all = parts_;
  all[s] = std::move(parts);
  return Chain(std::move(kernel), absorbing_, names_, std::move(all));
}

Chain chain_from_kernel(const Eigen::MatrixXd& kernel, std::vector<std::string> names) {
  std::vector<bool> absorbing(kernel.rows(), false);
  for (int s = 0; s < kernel.rows(); ++s) absorbing[s] = std::abs(kernel(s, s) - 1.0) <= kStochasticTolerance;
  return Chain(kernel, std::move(absorbing), std::move(names));
}

}  // namespace absorb_eq
