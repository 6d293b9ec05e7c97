#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/lang/interpreter.hpp"

namespace wmlab::lang {

struct TestCase {
  std::vector<std::int64_t> inputs;
  std::int64_t expected = 0;
};

/// A prompt surrogate: the template that answers it and the tests that
/// define the high-quality subspace.
struct Task {
  std::string id;
  std::string template_ref;
  std::vector<TestCase> test_cases;
  std::int64_t step_limit = kDefaultStepLimit;

  void validate() const {
    if (id.empty()) throw ConfigError("task id must be non-empty");
    if (test_cases.size() < 3) throw ConfigError("task '" + id + "' needs at least 3 test cases");
    if (step_limit <= 0) throw ConfigError("task '" + id + "' step_limit must be positive");
  }
};

/// 1 iff every test case evaluates to ok(expected). Any failure, including an
/// arity mismatch, maps to 0.
inline bool run_test_suite(const Task& task, const Program& program) {
  for (const auto& tc : task.test_cases) {
    if (tc.inputs.size() != program.param_count()) return false;
    if (!interpret(program, tc.inputs, task.step_limit).is_ok(tc.expected)) return false;
  }
  return true;
}

inline double pass_at_1(std::span<const int> results) {
  if (results.empty()) throw EmptyInput("pass_at_1 needs at least one result");
  double s = 0;
  for (int r : results) s += r != 0 ? 1.0 : 0.0;
  return s / static_cast<double>(results.size());
}

inline double pass_at_1(std::initializer_list<int> results) {
  return pass_at_1(std::span<const int>(results.begin(), results.size()));
}

// JSON: {id, template_ref, test_cases: [[[inputs...], expected], ...], step_limit}

inline void to_json(nlohmann::json& j, const Task& t) {
  auto cases = nlohmann::json::array();
  for (const auto& tc : t.test_cases) cases.push_back(nlohmann::json::array({tc.inputs, tc.expected}));
  j = nlohmann::json{{"id", t.id}, {"template_ref", t.template_ref}, {"test_cases", cases}, {"step_limit", t.step_limit}};
}

inline void from_json(const nlohmann::json& j, Task& t) {
  try {
    t.id = j.at("id").get<std::string>();
    t.template_ref = j.value("template_ref", t.id);
    t.test_cases.clear();
    for (const auto& c : j.at("test_cases")) {
      if (!c.is_array() || c.size() != 2) throw ConfigError("test case must be [[inputs...], expected]");
      t.test_cases.push_back({c[0].get<std::vector<std::int64_t>>(), c[1].get<std::int64_t>()});
    }
    t.step_limit = j.value("step_limit", kDefaultStepLimit);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed task: ") + e.what());
  }
  t.validate();
}

}  // namespace wmlab::lang
