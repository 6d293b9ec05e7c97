#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wmlab/lang/task.hpp"
#include "wmlab/model/template.hpp"

namespace wmlab::model {

/// A built-in task: source template plus a reference implementation used to
/// compute the expected test outputs.
struct CatalogEntry {
  std::string id;
  std::string source;
  std::function<std::int64_t(const std::vector<std::int64_t>&)> reference;
  std::vector<std::vector<std::int64_t>> inputs;
};

inline const std::vector<CatalogEntry>& default_catalog() {
  using V = std::vector<std::int64_t>;
  static const std::vector<CatalogEntry> entries = {
      {"arith",
       "fn f ( $0 , $1 ) { # let $2 = [ $0 * $1 | $1 * $0 ] ; # ~ let $3 = [ $2 + $0 | $0 + $2 ] ; "
       "# let $4 = [ $3 - $1 | 0 - $1 + $3 ] ; ~ # return $4 ; # }",
       [](const V& x) { return x[0] * x[1] + x[0] - x[1]; },
       {{2, 3}, {0, 0}, {-4, 5}, {7, -1}, {10, 10}}},
      {"max",
       "fn f ( $0 , $1 ) { # let $2 = $0 ; ~ # if ( [ $1 > $2 | $2 < $1 ] ) { # $2 = [ $1 | 1 * $1 ] ; ~ } "
       "# return [ $2 | 1 * $2 ] ; # }",
       [](const V& x) { return x[0] > x[1] ? x[0] : x[1]; },
       {{1, 2}, {5, 3}, {-4, -9}, {7, 7}, {0, 50}}},
      {"abs",
       "fn f ( $0 ) { # let $1 = $0 ; ~ # if ( [ $1 < 0 | 0 > $1 ] ) { # $1 = [ 0 - $1 | - $1 ] ; ~ } "
       "# let $2 = [ $1 + 0 | 0 + $1 ] ; # return $2 ; ~ }",
       [](const V& x) { return x[0] < 0 ? -x[0] : x[0]; },
       {{5}, {-7}, {0}, {-100}}},
      {"sumloop",
       "fn f ( $0 ) { # let $1 = 0 ; # let $2 = 1 ; ~ while ( [ $2 <= $0 | $0 >= $2 ] ) { "
       "# $1 = [ $1 + $2 | $2 + $1 ] ; # $2 = [ $2 + 1 | 1 + $2 ] ; ~ } # return $1 ; }",
       [](const V& x) { return x[0] > 0 ? x[0] * (x[0] + 1) / 2 : 0; },
       {{0}, {1}, {10}, {100}}},
      {"gcd",
       "fn f ( $0 , $1 ) { # let $2 = $0 ; # let $3 = $1 ; ~ while ( [ $3 != 0 | 0 != $3 ] ) { "
       "# let $4 = [ $2 % $3 | 0 + $2 % $3 ] ; # $2 = $3 ; ~ $3 = $4 ; } # return $2 ; }",
       [](const V& x) {
         std::int64_t a = x[0], b = x[1];
         while (b != 0) {
           std::int64_t r = a % b;
           a = b;
           b = r;
         }
         return a;
       },
       {{12, 18}, {7, 5}, {100, 75}, {9, 9}}},
      {"parity",
       "fn f ( $0 ) { # let $1 = [ $0 % 2 | 0 + $0 % 2 ] ; ~ # if ( [ $1 == 0 | 0 == $1 ] ) { "
       "# return [ 0 | $1 ] ; } ~ # return [ 1 | $1 ] ; # }",
       [](const V& x) { return x[0] % 2; },
       {{0}, {7}, {10}, {99}}},
      {"clamp",
       "fn f ( $0 , $1 , $2 ) { # let $3 = $0 ; ~ # if ( [ $3 < $1 | $1 > $3 ] ) { # $3 = $1 ; } "
       "# if ( [ $3 > $2 | $2 < $3 ] ) { ~ $3 = $2 ; } # return $3 ; # }",
       [](const V& x) { return x[0] < x[1] ? x[1] : (x[0] > x[2] ? x[2] : x[0]); },
       {{5, 0, 10}, {-3, 0, 10}, {42, 0, 10}, {7, 7, 7}}},
      {"linear",
       "fn f ( $0 ) { # let $1 = [ $0 * 3 | 3 * $0 ] ; ~ # let $2 = [ $1 + 7 | 7 + $1 ] ; # ~ "
       "let $3 = [ $2 | 0 + $2 ] ; # return $3 ; ~ }",
       [](const V& x) { return 3 * x[0] + 7; },
       {{0}, {1}, {-5}, {100}}},
  };
  return entries;
}

/// Small templates whose equivalence classes stay enumerable under small
/// pools; used where exact per-start mixing times are needed.
inline const std::vector<CatalogEntry>& compact_catalog() {
  using V = std::vector<std::int64_t>;
  static const std::vector<CatalogEntry> entries = {
      {"add",
       "fn f ( $0 , $1 ) { # let $2 = [ $0 + $1 | $1 + $0 ] ; ~ # return $2 ; }",
       [](const V& x) { return x[0] + x[1]; },
       {{1, 2}, {0, 0}, {-3, 8}}},
      {"double",
       "fn f ( $0 ) { # let $1 = [ $0 + $0 | 2 * $0 ] ; # ~ return $1 ; }",
       [](const V& x) { return 2 * x[0]; },
       {{0}, {4}, {-6}}},
      {"diff",
       "fn f ( $0 , $1 ) { ~ # let $2 = [ $0 - $1 | 0 - $1 + $0 ] ; # return $2 ; }",
       [](const V& x) { return x[0] - x[1]; },
       {{5, 2}, {0, 9}, {-1, -1}}},
  };
  return entries;
}

inline lang::Task make_task(const CatalogEntry& e) {
  lang::Task t;
  t.id = e.id;
  t.template_ref = e.id;
  for (const auto& in : e.inputs) t.test_cases.push_back({in, e.reference(in)});
  t.validate();
  return t;
}

/// A task paired with its compiled template.
struct TaskBundle {
  lang::Task task;
  Template tmpl;
};

inline std::vector<TaskBundle> bundles(const std::vector<CatalogEntry>& entries, const TemplatePools& pools = {}) {
  std::vector<TaskBundle> out;
  for (const auto& e : entries) out.push_back({make_task(e), compile_template(e.id, e.source, pools)});
  return out;
}

inline std::vector<TaskBundle> default_bundles(const TemplatePools& pools = {}) {
  return bundles(default_catalog(), pools);
}

inline std::vector<TaskBundle> compact_bundles(const TemplatePools& pools = {4, 2, 2, 0.9, 0.5}) {
  return bundles(compact_catalog(), pools);
}

inline const CatalogEntry* find_entry(const std::string& id) {
  for (const auto* cat : {&default_catalog(), &compact_catalog()}) {
    for (const auto& e : *cat) {
      if (e.id == id) return &e;
    }
  }
  return nullptr;
}

}  // namespace wmlab::model
