#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prmkit/types.hpp"

namespace prmkit::label {

// One labeled step, addressed into the solution list it was built from.
struct LabeledStepRecord {
  std::string problem_id;
  int solution_index = 0;
  int step_index = 0;
  int label = 0;      // hard {0,1}
  double soft = 0.0;  // fraction of correct completions
  std::string source;  // "single-completer" or "consistency-kept"
  std::vector<std::string> completer_names;
};

// Completion counts: one completer rollout = one completion.
struct CostLedger {
  std::int64_t completions_total = 0;
  std::map<std::string, std::int64_t> by_completer;

  void add(const std::string& completer, std::int64_t n) {
    completions_total += n;
    by_completer[completer] += n;
  }
  void merge(const CostLedger& other) {
    completions_total += other.completions_total;
    for (const auto& [name, n] : other.by_completer) by_completer[name] += n;
  }
};

struct LabelOptions {
  int rollouts_t = 8;     // completions per step (T)
  int retention_min = 1;  // drop solutions keeping fewer filtered steps
  bool truncate_after_first_zero = false;  // stop labeling past the first hard-0
};

void validate(const LabelOptions& opts);

// Monte Carlo estimate for one step: T completions from the prefix up to
// and including step_index; soft = correct/T, hard = 1 iff any completion
// reached the golden answer. Completion j draws from stream task j.
// Throws "T must be positive" for t < 1 and invalid_argument on a bad
// step_index. Each call adds t completions to the ledger when given.
StepLabelEstimate mc_estimate(const Problem& problem, const Solution& solution,
                              int step_index, const CompleterConfig& completer, int t,
                              std::uint64_t rng_stream, CostLedger* ledger = nullptr);

// Estimates every step of the solution; step i uses stream task i. With
// truncate_after_first_zero the result stops after the first hard-0 step
// (shorter vector), mirroring datasets that discard everything past the
// first detected error.
std::vector<StepLabelEstimate> label_solution(const Problem& problem,
                                              const Solution& solution,
                                              const CompleterConfig& completer, int t,
                                              std::uint64_t rng_stream,
                                              CostLedger* ledger = nullptr,
                                              bool truncate_after_first_zero = false);

std::vector<int> hard_labels(const std::vector<StepLabelEstimate>& estimates);

// Sets estimated_label on the first estimates.size() steps.
void apply_estimates(Solution& solution, const std::vector<StepLabelEstimate>& estimates);

// Per-step agreement of two hard label sequences: the label where both
// agree, nullopt where they disagree. Lengths must match.
std::vector<std::optional<int>> consistency_filter(const std::vector<int>& a,
                                                   const std::vector<int>& b);

struct FilteredDataset {
  std::vector<LabeledStepRecord> kept;        // consistency-kept steps
  std::vector<LabeledStepRecord> weak_all;    // weak completer's view, all steps
  std::vector<LabeledStepRecord> strong_all;  // strong completer's view, all steps
  CostLedger ledger;
};

// Labels every solution with both completers from one pass of rollouts
// (solution s uses stream tasks 2s and 2s+1), then keeps the steps whose
// hard labels agree. Solutions keeping fewer than retention_min steps
// contribute nothing to `kept`. Exactly 2*t*steps completions per solution
// land in the ledger. Deterministic for every worker_count.
FilteredDataset build_filtered_dataset(const std::vector<Problem>& problems,
                                       const std::vector<Solution>& solutions,
                                       const CompleterConfig& weak,
                                       const CompleterConfig& strong,
                                       const LabelOptions& opts,
                                       std::uint64_t rng_stream, int worker_count = 1);

// Single-completer labeling of the whole dataset; solution s uses stream
// task s. Appends t*steps completions per solution to the ledger.
std::vector<LabeledStepRecord> label_dataset(const std::vector<Problem>& problems,
                                             const std::vector<Solution>& solutions,
                                             const CompleterConfig& completer,
                                             const LabelOptions& opts,
                                             std::uint64_t rng_stream,
                                             CostLedger* ledger = nullptr,
                                             int worker_count = 1);

// Fraction of records whose hard label matches the simulator truth label.
// Throws "ground truth unavailable" if a referenced step has none, and
// invalid_argument "no records" on an empty input.
double label_accuracy(const std::vector<LabeledStepRecord>& records,
                      const std::vector<Solution>& solutions);

// --- serialization -----------------------------------------------------------

inline void to_json(nlohmann::json& j, const LabeledStepRecord& r) {
  j = nlohmann::json{{"problem_id", r.problem_id}, {"solution_index", r.solution_index},
                     {"step_index", r.step_index}, {"label", r.label},
                     {"soft", r.soft},             {"source", r.source},
                     {"completer_names", r.completer_names}};
}

inline void from_json(const nlohmann::json& j, LabeledStepRecord& r) {
  j.at("problem_id").get_to(r.problem_id);
  j.at("solution_index").get_to(r.solution_index);
  j.at("step_index").get_to(r.step_index);
  j.at("label").get_to(r.label);
  j.at("soft").get_to(r.soft);
  j.at("source").get_to(r.source);
  r.completer_names.clear();
  if (j.contains("completer_names")) j.at("completer_names").get_to(r.completer_names);
}

inline void to_json(nlohmann::json& j, const CostLedger& c) {
  j = nlohmann::json{{"completions_total", c.completions_total},
                     {"completions_by_completer", c.by_completer}};
}

inline void from_json(const nlohmann::json& j, CostLedger& c) {
  j.at("completions_total").get_to(c.completions_total);
  j.at("completions_by_completer").get_to(c.by_completer);
}

}  // namespace prmkit::label
