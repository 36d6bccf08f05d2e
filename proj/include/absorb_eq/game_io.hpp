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

// JSON game and profile files. Probabilities are decimal strings (or
// "n/d" fractions) read as exact rationals; a row or distribution whose
// exact sum is off from one by more than 1e-14 but at most
// kStochasticTolerance is normalized exactly before the single rounding to
// double. Serialization is canonical:
// sorted keys, transitions in index order, shortest round-trip decimals.

#ifndef ABSORB_EQ_GAME_IO_HPP_
#define ABSORB_EQ_GAME_IO_HPP_

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "absorb_eq/game_model.hpp"

namespace absorb_eq {

// `location` is "line L, column C" for syntax errors and a JSON pointer to
// the offending field otherwise.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& location, const std::string& message)
      : std::runtime_error(location + ": " + message), location_(location) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

GameSpec parse_game(const std::string& text);
GameSpec game_from_json(const nlohmann::json& doc);
nlohmann::json game_to_json(const GameSpec& game);
std::string serialize_game(const GameSpec& game);

// {"strategies": {state: {"p1": {action: p}, "p2": {action: p}}}} over the
// non-absorbing states; unlisted actions get zero.
StrategyProfile parse_profile(const GameSpec& game, const std::string& text);
StrategyProfile profile_from_json(const GameSpec& game, const nlohmann::json& doc);
nlohmann::json profile_to_json(const GameSpec& game, const StrategyProfile& profile);
std::string serialize_profile(const GameSpec& game, const StrategyProfile& profile);

// Shortest decimal that reads back to the same double.
std::string format_decimal(double value);

// Whole file as a string; throws ParseError with location = path.
std::string read_text_file(const std::string& path);

}  // namespace absorb_eq

#endif  // ABSORB_EQ_GAME_IO_HPP_
