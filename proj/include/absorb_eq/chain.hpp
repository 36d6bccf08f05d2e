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

#ifndef ABSORB_EQ_CHAIN_HPP_
#define ABSORB_EQ_CHAIN_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absorb_eq/game_model.hpp"

namespace absorb_eq {

// A part of the transition at a host state: it is used with frequency
// `frequency` and, when used, moves according to the conditional row `row`.
// A replacement transition is a part with frequency 1.
struct Part {
  StateId host = 0;
  double frequency = 1.0;
  Eigen::VectorXd row;
  int p1_action = -1;
  int p2_action = -1;
  std::string label;

  // Unconditional mass frequency * row.
  Eigen::VectorXd mass() const { return frequency * row; }
};

// Builds a part from its unconditional mass vector. A zero mass gives a part
// of frequency zero whose conditional row is the self-loop at `host`.
Part part_from_mass(StateId host, const Eigen::VectorXd& mass, std::string label = {});

// Finite time-homogeneous Markov chain with designated absorbing states and
// an optional decomposition of each row into labeled parts.
class Chain {
 public:
  Chain() = default;
  // Throws std::invalid_argument when the kernel is not square, some row is
  // not stochastic within kStochasticTolerance (rows are then renormalized
  // exactly), an absorbing state does not self-loop, or part frequencies do
  // not sum to one. Missing decompositions default to one part per row.
  Chain(Eigen::MatrixXd kernel, std::vector<bool> absorbing, std::vector<std::string> names = {},
        std::vector<std::vector<Part>> parts = {});

  int size() const { return static_cast<int>(kernel_.rows()); }
  const Eigen::MatrixXd& kernel() const { return kernel_; }
  double q(StateId from, StateId to) const { return kernel_(from, to); }
  Eigen::VectorXd row(StateId s) const { return kernel_.row(s).transpose(); }
  bool is_absorbing(StateId s) const { return absorbing_.at(s); }
  const std::vector<bool>& absorbing_flags() const { return absorbing_; }
  std::vector<StateId> absorbing_states() const;
  std::vector<StateId> non_absorbing_states() const;
  const std::string& name(StateId s) const { return names_.at(s); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Part>& parts(StateId s) const { return parts_.at(s); }

  // Copy with the row at s replaced; the decomposition at s becomes a
  // single part.
  Chain with_row(StateId s, const Eigen::VectorXd& row) const;
  Chain with_parts(StateId s, std::vector<Part> parts) const;

 private:
  Eigen::MatrixXd kernel_;
  std::vector<bool> absorbing_;
  std::vector<std::string> names_;
  std::vector<std::vector<Part>> parts_;
};

// Builds a chain whose absorbing states are exactly those with a unit
// self-loop.
Chain chain_from_kernel(const Eigen::MatrixXd& kernel, std::vector<std::string> names = {});

}  // namespace absorb_eq

#endif  // ABSORB_EQ_CHAIN_HPP_
