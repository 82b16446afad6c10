#include "prmkit/validate.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "prmkit/verify.hpp"

namespace prmkit {

std::string ValidationReport::to_string() const {
  if (violations.empty()) return "ok\n";
  std::ostringstream out;
  for (const auto& v : violations) out << v.record << ": " << v.message << '\n';
  return out.str();
}

ValidationReport validate_dataset(const std::vector<Problem>& problems,
                                  const std::vector<Solution>& solutions,
                                  int feature_dim) {
  ValidationReport report;
  auto flag = [&](std::string record, std::string message) {
    report.violations.push_back({std::move(record), std::move(message)});
  };

  std::unordered_map<std::string, const Problem*> by_id;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& p = problems[i];
    const std::string rec = "problem " + (p.id.empty() ? "#" + std::to_string(i) : p.id);
    if (p.id.empty()) flag(rec, "empty id");
    else if (!seen.insert(p.id).second) flag(rec, "duplicate id");
    if (p.plan_length < 1) flag(rec, "plan_length must be >= 1");
    if (p.difficulty < 0.0 || p.difficulty > 1.0) flag(rec, "difficulty out of [0,1]");
    if (p.golden_answer.empty()) flag(rec, "empty golden answer");
    by_id[p.id] = &p;
  }

  for (std::size_t i = 0; i < solutions.size(); ++i) {
    const Solution& s = solutions[i];
    const std::string rec = "solution #" + std::to_string(i);
    const auto it = by_id.find(s.problem_id);
    if (it == by_id.end()) flag(rec, "unknown problem_id " + s.problem_id);
    if (s.steps.empty()) flag(rec, "no steps");
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
      const Step& st = s.steps[k];
      if (st.text.empty()) flag(rec, "step " + std::to_string(k) + ": empty text");
      if (feature_dim > 0 && static_cast<int>(st.features.size()) != feature_dim)
        flag(rec, "step " + std::to_string(k) + ": feature dim " +
                      std::to_string(st.features.size()) + " != " +
                      std::to_string(feature_dim));
      if (st.estimated_label) {
        const StepLabelEstimate& e = *st.estimated_label;
        try {
          const StepLabelEstimate canon = make_estimate(e.rollouts, e.correct_rollouts);
          if (canon.soft != e.soft || canon.hard != e.hard)
            flag(rec, "step " + std::to_string(k) + ": inconsistent estimate fields");
        } catch (const std::invalid_argument& ex) {
          flag(rec, "step " + std::to_string(k) + ": " + ex.what());
        }
      }
    }
    if (s.outcome_label && *s.outcome_label != 0 && *s.outcome_label != 1)
      flag(rec, "outcome_label not in {0,1}");
    if (s.outcome_label && it != by_id.end() &&
        (*s.outcome_label == 1) !=
            verify::answers_equal(s.final_answer, it->second->golden_answer))
      flag(rec, "outcome_label disagrees with answer equivalence");
  }
  return report;
}

}  // namespace prmkit
