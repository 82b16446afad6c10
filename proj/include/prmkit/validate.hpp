#pragma once

#include <string>
#include <vector>

#include "prmkit/types.hpp"

namespace prmkit {

struct Violation {
  std::string record;   // "problem <id>" or "solution <index>"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Structural checks over a problem/solution dataset:
//   problems: unique non-empty ids, plan_length >= 1, difficulty in [0,1],
//             non-empty golden answer;
//   solutions: known problem_id, at least one step, non-empty step texts,
//              features sized feature_dim (when feature_dim > 0),
//              outcome_label consistent with answers_equal(final, golden),
//              estimate invariants when estimated labels are present.
ValidationReport validate_dataset(const std::vector<Problem>& problems,
                                  const std::vector<Solution>& solutions,
                                  int feature_dim = kDefaultFeatureDim);

}  // namespace prmkit
