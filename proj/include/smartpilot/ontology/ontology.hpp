#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/kernel/loss.hpp"

namespace smartpilot::ontology {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  std::string unit;

  bool contains(double v) const { return lo <= v && v <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct CycleState {
  std::string state_id;
  std::string description;
  std::map<std::string, std::string> robot_functions;
  std::map<std::string, Range> variable_ranges;

  friend bool operator==(const CycleState&, const CycleState&) = default;
};

/// Cycle states with per-state expected sensor ranges and robot functions.
/// Immutable after load; lookups are by state id.
class ProcessOntology {
 public:
  ProcessOntology() = default;

  // Throws ValidationError listing every violation found.
  ProcessOntology(std::string version, std::string facility_id, std::vector<CycleState> states)
      : version_(std::move(version)), facility_id_(std::move(facility_id)), states_(std::move(states)) {
    validate();
    for (std::size_t i = 0; i < states_.size(); ++i) index_[states_[i].state_id] = i;
  }

  const std::string& version() const { return version_; }
  const std::string& facility_id() const { return facility_id_; }
  const std::vector<CycleState>& states() const { return states_; }

  bool has_state(const std::string& id) const { return index_.contains(id); }

  const CycleState& state(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw LookupError("unknown cycle state '" + id + "'");
    return states_[it->second];
  }

  const Range& range(const std::string& state_id, const std::string& variable) const {
    const auto& s = state(state_id);
    auto it = s.variable_ranges.find(variable);
    if (it == s.variable_ranges.end())
      throw LookupError("state '" + state_id + "' has no range for variable '" + variable + "'");
    return it->second;
  }

  // Variables shared by every state (validation guarantees they are identical).
  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    if (!states_.empty())
      for (const auto& [name, r] : states_.front().variable_ranges) out.push_back(name);
    return out;
  }

  std::size_t range_count() const {
    std::size_t n = 0;
    for (const auto& s : states_) n += s.variable_ranges.size();
    return n;
  }

  friend bool operator==(const ProcessOntology& a, const ProcessOntology& b) {
    return a.version_ == b.version_ && a.facility_id_ == b.facility_id_ && a.states_ == b.states_;
  }

 private:
  void validate() const {
    std::vector<std::string> problems;
    std::set<std::string> seen;
    std::set<std::string> all_vars;
    for (const auto& s : states_)
      for (const auto& [name, r] : s.variable_ranges) all_vars.insert(name);
    for (const auto& s : states_) {
      if (s.state_id.empty()) problems.push_back("state with empty state_id");
      if (!seen.insert(s.state_id).second) problems.push_back("duplicate state id '" + s.state_id + "'");
      for (const auto& v : all_vars)
        if (!s.variable_ranges.contains(v))
          problems.push_back("state '" + s.state_id + "' is missing a range for variable '" + v + "'");
      for (const auto& [name, r] : s.variable_ranges) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
          problems.push_back("state '" + s.state_id + "' variable '" + name + "': non-finite bound");
        else if (r.lo > r.hi)
          problems.push_back("state '" + s.state_id + "' variable '" + name + "': lo " + std::to_string(r.lo) +
                             " > hi " + std::to_string(r.hi));
      }
    }
    if (!problems.empty()) {
      std::string msg = "ontology validation failed:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ValidationError(msg);
    }
  }

  std::string version_;
  std::string facility_id_;
  std::vector<CycleState> states_;
  std::map<std::string, std::size_t> index_;
};

inline nlohmann::json to_json(const ProcessOntology& onto) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : onto.states()) {
    nlohmann::json ranges = nlohmann::json::object();
    for (const auto& [name, r] : s.variable_ranges) ranges[name] = {{"lo", r.lo}, {"hi", r.hi}, {"unit", r.unit}};
    states.push_back({{"state_id", s.state_id},
                      {"description", s.description},
                      {"robot_functions", s.robot_functions},
                      {"variable_ranges", ranges}});
  }
  return {{"version", onto.version()}, {"facility_id", onto.facility_id()}, {"states", states}};
}

inline ProcessOntology ontology_from_json(const nlohmann::json& j) {
  try {
    std::vector<CycleState> states;
    for (const auto& sj : j.at("states")) {
      CycleState s;
      s.state_id = sj.at("state_id").get<std::string>();
      s.description = sj.value("description", "");
      if (sj.contains("robot_functions"))
        s.robot_functions = sj.at("robot_functions").get<std::map<std::string, std::string>>();
      for (const auto& [name, rj] : sj.at("variable_ranges").items())
        s.variable_ranges[name] = Range{rj.at("lo").get<double>(), rj.at("hi").get<double>(), rj.value("unit", "")};
      states.push_back(std::move(s));
    }
    return ProcessOntology(j.at("version").get<std::string>(), j.at("facility_id").get<std::string>(),
                           std::move(states));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("ontology document malformed: ") + e.what());
  }
}

inline ProcessOntology load_ontology_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("ontology document is not well-formed: ") + e.what());
  }
  return ontology_from_json(j);
}

inline std::string save_ontology_text(const ProcessOntology& onto) { return to_json(onto).dump(2) + "\n"; }

inline ProcessOntology load_ontology(const std::string& path) {
  return ontology_from_json(kernel::load_json(path));
}

inline void save_ontology(const ProcessOntology& onto, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << save_ontology_text(onto);
}

/// Sum over variables of the quadratic hinge outside the state's range:
/// max(0, lo - v)^2 + max(0, v - hi)^2. `names[i]` labels `values[i]`.
inline double range_penalty(std::span<const double> values, std::span<const std::string> names,
                            const std::string& state_id, const ProcessOntology& onto) {
  if (values.size() != names.size()) throw DimensionError("range_penalty: values and names differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& r = onto.range(state_id, names[i]);
    total += kernel::hinge_value(values[i], r.lo, r.hi);
  }
  return total;
}

inline double range_penalty(const std::map<std::string, double>& prediction, const std::string& state_id,
                            const ProcessOntology& onto) {
  double total = 0.0;
  for (const auto& [name, v] : prediction) {
    const auto& r = onto.range(state_id, name);
    total += kernel::hinge_value(v, r.lo, r.hi);
  }
  return total;
}

// d penalty / d values.
inline std::vector<double> range_penalty_gradient(std::span<const double> values, std::span<const std::string> names,
                                                  const std::string& state_id, const ProcessOntology& onto) {
  std::vector<double> g(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& r = onto.range(state_id, names[i]);
    g[i] = kernel::hinge_derivative(values[i], r.lo, r.hi);
  }
  return g;
}

struct Violation {
  std::string variable;
  double observed = 0.0;
  double expected_lo = 0.0;
  double expected_hi = 0.0;

  double magnitude() const { return observed < expected_lo ? expected_lo - observed : observed - expected_hi; }
  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Answers: which variables are responsible, what the robots were doing in
/// that state, and what values were expected.
struct Explanation {
  std::vector<Violation> responsible_variables;
  std::string state_id;
  std::string state_description;
  std::map<std::string, std::string> robot_functions;
  bool possible_misclassification = false;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

inline Explanation explain(bool predicted_anomalous, std::span<const double> frame, std::span<const std::string> names,
                           const std::string& state_id, const ProcessOntology& onto) {
  const auto& s = onto.state(state_id);
  if (frame.size() != names.size()) throw DimensionError("explain: frame and names differ in length");
  Explanation ex;
  ex.state_id = state_id;
  ex.state_description = s.description;
  ex.robot_functions = s.robot_functions;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    auto it = s.variable_ranges.find(names[i]);
    if (it == s.variable_ranges.end()) continue;
    if (!it->second.contains(frame[i]))
      ex.responsible_variables.push_back({names[i], frame[i], it->second.lo, it->second.hi});
  }
  std::stable_sort(ex.responsible_variables.begin(), ex.responsible_variables.end(),
                   [](const Violation& a, const Violation& b) {
                     if (a.magnitude() != b.magnitude()) return a.magnitude() > b.magnitude();
                     return a.variable < b.variable;
                   });
  ex.possible_misclassification = predicted_anomalous && ex.responsible_variables.empty();
  return ex;
}

inline nlohmann::json to_json(const Explanation& ex) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : ex.responsible_variables)
    vars.push_back({{"variable", v.variable},
                    {"observed", v.observed},
                    {"expected_lo", v.expected_lo},
                    {"expected_hi", v.expected_hi}});
  return {{"responsible_variables", vars},
          {"state_id", ex.state_id},
          {"state_description", ex.state_description},
          {"robot_functions", ex.robot_functions},
          {"possible_misclassification", ex.possible_misclassification}};
}

}  // namespace smartpilot::ontology
