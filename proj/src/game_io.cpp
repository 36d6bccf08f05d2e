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

#include "absorb_eq/game_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace absorb_eq {
namespace {

using json = nlohmann::json;
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string child(const std::string& path, size_t index) { return path + "/" + std::to_string(index); }

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ParseError(path.empty() ? "/" : path, message);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path, "missing field \"" + key + "\"");
  return *it;
}

void allow_only(const json& obj, const std::set<std::string>& keys, const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) fail(child(path, key), "unknown field");
  }
}

const json& object_at(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  return v;
}

const json& array_at(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

std::string string_at(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Decimal digit string to integer; a leading zero would otherwise select octal.
BigInt decimal_integer(const std::string& digits) {
  const size_t first = digits.find_first_not_of('0');
  return first == std::string::npos ? BigInt(0) : BigInt(digits.substr(first));
}

// Non-negative decimal ("0.25", ".5", "2.5e-3") or fraction ("1/3").
Rational parse_rational(const std::string& text, const std::string& path) {
  if (!text.empty() && text[0] == '-') fail(path, "negative probability \"" + text + "\"");
  const size_t slash = text.find('/');
  if (slash != std::string::npos) {
    const std::string num = text.substr(0, slash);
    const std::string den = text.substr(slash + 1);
    if (!all_digits(num) || !all_digits(den)) fail(path, "malformed fraction \"" + text + "\"");
    const BigInt d = decimal_integer(den);
    if (d == 0) fail(path, "zero denominator in \"" + text + "\"");
    return Rational(decimal_integer(num), d);
  }
  std::string mantissa = text;
  long exponent = 0;
  const size_t e = text.find_first_of("eE");
  if (e != std::string::npos) {
    mantissa = text.substr(0, e);
    std::string exp = text.substr(e + 1);
    bool negative = false;
    if (!exp.empty() && (exp[0] == '+' || exp[0] == '-')) {
      negative = exp[0] == '-';
      exp = exp.substr(1);
    }
    if (!all_digits(exp) || exp.size() > 4) fail(path, "malformed exponent in \"" + text + "\"");
    exponent = std::stol(exp) * (negative ? -1 : 1);
  }
  const size_t dot = mantissa.find('.');
  std::string whole = mantissa.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : mantissa.substr(dot + 1);
  if ((whole.empty() && frac.empty()) || (!whole.empty() && !all_digits(whole)) ||
      (!frac.empty() && !all_digits(frac))) {
    fail(path, "malformed decimal \"" + text + "\"");
  }
  exponent -= static_cast<long>(frac.size());
  if (exponent < -1000 || exponent > 1000) fail(path, "exponent out of range in \"" + text + "\"");
  const BigInt digits = decimal_integer(whole + frac);
  const BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::labs(exponent)));
  return exponent >= 0 ? Rational(digits * scale) : Rational(digits, scale);
}

Rational probability_at(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "probabilities are decimal strings");
  return parse_rational(v.get<std::string>(), path);
}

// Exact normalization when the sum is off by more than double rounding of
// the entries but within the stochastic tolerance of one. Rows of shortest
// decimals written from doubles are read back unchanged; rows far from one
// are kept for validation to report.
std::vector<double> to_doubles(const std::vector<Rational>& values) {
  Rational sum = 0;
  for (const Rational& v : values) sum += v;
  const Rational off = boost::multiprecision::abs(sum - 1);
  const bool normalize = sum > 0 && off > Rational(BigInt(1), BigInt(100000000000000)) &&
                         off <= Rational(BigInt(1), BigInt(1000000000));
  std::vector<double> out;
  out.reserve(values.size());
  for (const Rational& v : values) out.push_back((normalize ? Rational(v / sum) : v).convert_to<double>());
  return out;
}

std::vector<std::string> action_list(const json& v, const std::string& path) {
  array_at(v, path);
  if (v.empty()) fail(path, "empty action list");
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (size_t i = 0; i < v.size(); ++i) {
    names.push_back(string_at(v[i], child(path, i)));
    if (!seen.insert(names.back()).second) fail(child(path, i), "duplicate action \"" + names.back() + "\"");
  }
  return names;
}

int action_index(const std::vector<std::string>& names, const std::string& name, const std::string& path) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(path, "unknown action \"" + name + "\"");
  return static_cast<int>(it - names.begin());
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, column = 1;
    const size_t end = std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column), "invalid JSON");
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace

std::string format_decimal(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GameSpec game_from_json(const json& doc) {
  object_at(doc, "");
  allow_only(doc, {"states", "actions", "transitions", "omega", "description"}, "");

  GameSpec game;
  game.omega = number_at(field(doc, "omega", ""), "/omega");

  const json& states = array_at(field(doc, "states", ""), "/states");
  if (states.empty()) fail("/states", "no states");
  std::map<std::string, StateId> index;
  for (size_t i = 0; i < states.size(); ++i) {
    const std::string path = child("/states", i);
    const json& st = object_at(states[i], path);
    allow_only(st, {"name", "absorbing", "r1", "r2"}, path);
    StateSpec spec;
    spec.name = string_at(field(st, "name", path), child(path, "name"));
    if (spec.name.empty()) fail(child(path, "name"), "empty state name");
    if (!index.emplace(spec.name, static_cast<StateId>(i)).second) {
      fail(child(path, "name"), "duplicate state \"" + spec.name + "\"");
    }
    const json& absorbing = field(st, "absorbing", path);
    if (!absorbing.is_boolean()) fail(child(path, "absorbing"), "expected true or false");
    spec.absorbing = absorbing.get<bool>();
    if (spec.absorbing) {
      spec.r1 = number_at(field(st, "r1", path), child(path, "r1"));
      spec.r2 = number_at(field(st, "r2", path), child(path, "r2"));
    } else if (st.contains("r1") || st.contains("r2")) {
      fail(path, "payoffs are only defined at absorbing states");
    }
    game.states.push_back(std::move(spec));
  }
  const int n = game.num_states();

  const json& actions = object_at(field(doc, "actions", ""), "/actions");
  for (const auto& [name, lists] : actions.items()) {
    const std::string path = child("/actions", name);
    const auto it = index.find(name);
    if (it == index.end()) fail(path, "unknown state \"" + name + "\"");
    if (game.states[it->second].absorbing) fail(path, "absorbing states have no actions");
    object_at(lists, path);
    allow_only(lists, {"p1", "p2"}, path);
    game.states[it->second].p1_actions = action_list(field(lists, "p1", path), child(path, "p1"));
    game.states[it->second].p2_actions = action_list(field(lists, "p2", path), child(path, "p2"));
  }
  for (StateId s = 0; s < n; ++s) {
    StateSpec& st = game.states[s];
    if (st.absorbing) {
      st.p1_actions = {"-"};
      st.p2_actions = {"-"};
      st.rows = {Eigen::VectorXd::Unit(n, s)};
    } else {
      if (st.p1_actions.empty()) fail("/actions", "missing actions for state \"" + st.name + "\"");
      st.rows.assign(st.p1_actions.size() * st.p2_actions.size(), Eigen::VectorXd::Zero(n));
    }
  }

  // Exact entries per (state, action pair), keyed by target.
  std::map<std::pair<StateId, int>, std::map<StateId, Rational>> entries;
  const json& transitions = array_at(field(doc, "transitions", ""), "/transitions");
  for (size_t i = 0; i < transitions.size(); ++i) {
    const std::string path = child("/transitions", i);
    const json& tr = object_at(transitions[i], path);
    allow_only(tr, {"from", "a", "b", "to", "p"}, path);
    const auto lookup = [&](const char* key) {
      const std::string name = string_at(field(tr, key, path), child(path, key));
      const auto it = index.find(name);
      if (it == index.end()) fail(child(path, key), "unknown state \"" + name + "\"");
      return it->second;
    };
    const StateId from = lookup("from");
    const StateId to = lookup("to");
    const StateSpec& st = game.states[from];
    if (st.absorbing) fail(child(path, "from"), "absorbing states have fixed transitions");
    const int a = action_index(st.p1_actions, string_at(field(tr, "a", path), child(path, "a")), child(path, "a"));
    const int b = action_index(st.p2_actions, string_at(field(tr, "b", path), child(path, "b")), child(path, "b"));
    const Rational p = probability_at(field(tr, "p", path), child(path, "p"));
    auto& row = entries[{from, a * st.num_p2() + b}];
    if (!row.emplace(to, p).second) fail(path, "duplicate transition");
  }
  for (const auto& [key, row] : entries) {
    std::vector<Rational> values;
    for (const auto& [to, p] : row) values.push_back(p);
    const std::vector<double> probs = to_doubles(values);
    size_t k = 0;
    for (const auto& [to, p] : row) game.states[key.first].rows[key.second](to) = probs[k++];
  }
  return game;
}

GameSpec parse_game(const std::string& text) { return game_from_json(parse_document(text)); }

json game_to_json(const GameSpec& game) {
  json doc;
  doc["omega"] = game.omega;
  doc["states"] = json::array();
  doc["actions"] = json::object();
  doc["transitions"] = json::array();
  for (const StateSpec& st : game.states) {
    json entry = {{"name", st.name}, {"absorbing", st.absorbing}};
    if (st.absorbing) {
      entry["r1"] = st.r1;
      entry["r2"] = st.r2;
    }
    doc["states"].push_back(entry);
  }
  for (const StateSpec& st : game.states) {
    if (st.absorbing) continue;
    doc["actions"][st.name] = {{"p1", st.p1_actions}, {"p2", st.p2_actions}};
    for (int a = 0; a < st.num_p1(); ++a) {
      for (int b = 0; b < st.num_p2(); ++b) {
        const Eigen::VectorXd& row = st.row(a, b);
        for (StateId t = 0; t < row.size(); ++t) {
          if (row(t) == 0.0) continue;
          doc["transitions"].push_back({{"from", st.name},
                                        {"a", st.p1_actions[a]},
                                        {"b", st.p2_actions[b]},
                                        {"to", game.states[t].name},
                                        {"p", format_decimal(row(t))}});
        }
      }
    }
  }
  return doc;
}

std::string serialize_game(const GameSpec& game) { return dump(game_to_json(game)); }

StrategyProfile profile_from_json(const GameSpec& game, const json& doc) {
  object_at(doc, "");
  allow_only(doc, {"strategies", "description"}, "");
  const json& strategies = object_at(field(doc, "strategies", ""), "/strategies");
  StrategyProfile profile = uniform_profile(game);
  for (const auto& [name, entry] : strategies.items()) {
    const std::string path = child("/strategies", name);
    StateId s = 0;
    try {
      s = game.index_of(name);
    } catch (const std::out_of_range&) {
      fail(path, "unknown state \"" + name + "\"");
    }
    if (game.is_absorbing(s)) fail(path, "absorbing states have no strategy");
    object_at(entry, path);
    allow_only(entry, {"p1", "p2"}, path);
  }
  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    const std::string path = child("/strategies", st.name);
    if (!strategies.contains(st.name)) fail(path, "missing strategy");
    const json& entry = strategies.at(st.name);
    for (int player : {1, 2}) {
      const std::string key = player == 1 ? "p1" : "p2";
      const std::vector<std::string>& names = player == 1 ? st.p1_actions : st.p2_actions;
      const json& dist = object_at(field(entry, key, path), child(path, key));
      std::vector<Rational> mass(names.size(), Rational(0));
      for (const auto& [action, p] : dist.items()) {
        const std::string apath = child(child(path, key), action);
        mass[action_index(names, action, apath)] = probability_at(p, apath);
      }
      const std::vector<double> probs = to_doubles(mass);
      Eigen::VectorXd& out = player == 1 ? profile.x[s] : profile.y[s];
      out = Eigen::Map<const Eigen::VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size()));
    }
  }
  check_profile(game, profile);
  return profile;
}

StrategyProfile parse_profile(const GameSpec& game, const std::string& text) {
  return profile_from_json(game, parse_document(text));
}

json profile_to_json(const GameSpec& game, const StrategyProfile& profile) {
  check_profile(game, profile);
  json strategies = json::object();
  for (StateId s : game.non_absorbing_states()) {
    const StateSpec& st = game.state(s);
    json p1 = json::object(), p2 = json::object();
    for (int a = 0; a < st.num_p1(); ++a) {
      if (profile.x[s](a) != 0.0) p1[st.p1_actions[a]] = format_decimal(profile.x[s](a));
    }
    for (int b = 0; b < st.num_p2(); ++b) {
      if (profile.y[s](b) != 0.0) p2[st.p2_actions[b]] = format_decimal(profile.y[s](b));
    }
    strategies[st.name] = {{"p1", p1}, {"p2", p2}};
  }
  return {{"strategies", strategies}};
}

std::string serialize_profile(const GameSpec& game, const StrategyProfile& profile) {
  return dump(profile_to_json(game, profile));
}

}  // namespace absorb_eq
