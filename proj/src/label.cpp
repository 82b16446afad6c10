#include "prmkit/label.hpp"

#include <span>
#include <stdexcept>
#include <unordered_map>

#include "prmkit/parallel.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/simulate.hpp"

namespace prmkit::label {
namespace {

std::unordered_map<std::string, const Problem*> index_problems(
    const std::vector<Problem>& problems) {
  std::unordered_map<std::string, const Problem*> by_id;
  by_id.reserve(problems.size());
  for (const Problem& p : problems) by_id[p.id] = &p;
  return by_id;
}

const Problem& problem_for(
    const std::unordered_map<std::string, const Problem*>& by_id,
    const std::string& problem_id) {
  const auto it = by_id.find(problem_id);
  if (it == by_id.end()) throw std::runtime_error("unknown problem_id " + problem_id);
  return *it->second;
}

LabeledStepRecord make_record(const std::string& problem_id, int solution_index,
                              int step_index, const StepLabelEstimate& est,
                              std::string source,
                              std::vector<std::string> completer_names) {
  LabeledStepRecord r;
  r.problem_id = problem_id;
  r.solution_index = solution_index;
  r.step_index = step_index;
  r.label = est.hard;
  r.soft = est.soft;
  r.source = std::move(source);
  r.completer_names = std::move(completer_names);
  return r;
}

}  // namespace

void validate(const LabelOptions& opts) {
  if (opts.rollouts_t < 1) throw std::invalid_argument("T must be positive");
  if (opts.retention_min < 0)
    throw std::invalid_argument("retention_min must be >= 0");
}

StepLabelEstimate mc_estimate(const Problem& problem, const Solution& solution,
                              int step_index, const CompleterConfig& completer, int t,
                              std::uint64_t rng_stream, CostLedger* ledger) {
  if (t < 1) throw std::invalid_argument("T must be positive");
  if (step_index < 0 || step_index >= static_cast<int>(solution.steps.size()))
    throw std::invalid_argument("step_index out of range");
  const std::span<const Step> prefix(solution.steps.data(),
                                     static_cast<std::size_t>(step_index) + 1);
  int correct = 0;
  for (int j = 0; j < t; ++j) {
    const auto outcome = sim::completer_rollout(
        problem, prefix, completer,
        derive_rng_stream(rng_stream, static_cast<std::uint64_t>(j)));
    if (outcome.correct) ++correct;
  }
  if (ledger) ledger->add(completer.name, t);
  return make_estimate(t, correct);
}

std::vector<StepLabelEstimate> label_solution(const Problem& problem,
                                              const Solution& solution,
                                              const CompleterConfig& completer, int t,
                                              std::uint64_t rng_stream,
                                              CostLedger* ledger,
                                              bool truncate_after_first_zero) {
  std::vector<StepLabelEstimate> estimates;
  estimates.reserve(solution.steps.size());
  for (int i = 0; i < static_cast<int>(solution.steps.size()); ++i) {
    estimates.push_back(mc_estimate(problem, solution, i, completer, t,
                                    derive_rng_stream(rng_stream,
                                                      static_cast<std::uint64_t>(i)),
                                    ledger));
    if (truncate_after_first_zero && estimates.back().hard == 0) break;
  }
  return estimates;
}

std::vector<int> hard_labels(const std::vector<StepLabelEstimate>& estimates) {
  std::vector<int> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) out.push_back(e.hard);
  return out;
}

void apply_estimates(Solution& solution, const std::vector<StepLabelEstimate>& estimates) {
  if (estimates.size() > solution.steps.size())
    throw std::invalid_argument("more estimates than steps");
  for (std::size_t i = 0; i < estimates.size(); ++i)
    solution.steps[i].estimated_label = estimates[i];
}

std::vector<std::optional<int>> consistency_filter(const std::vector<int>& a,
                                                   const std::vector<int>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("label sequences differ in length");
  std::vector<std::optional<int>> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) out[i] = a[i];
  return out;
}

FilteredDataset build_filtered_dataset(const std::vector<Problem>& problems,
                                       const std::vector<Solution>& solutions,
                                       const CompleterConfig& weak,
                                       const CompleterConfig& strong,
                                       const LabelOptions& opts,
                                       std::uint64_t rng_stream, int worker_count) {
  validate(opts);
  const auto by_id = index_problems(problems);

  struct PerSolution {
    std::vector<StepLabelEstimate> weak_est, strong_est;
    CostLedger ledger;
  };
  const auto per = parallel_map<PerSolution>(
      solutions.size(), worker_count, [&](std::size_t s) {
        const Solution& sol = solutions[s];
        const Problem& prob = problem_for(by_id, sol.problem_id);
        PerSolution r;
        r.weak_est = label_solution(prob, sol, weak, opts.rollouts_t,
                                    derive_rng_stream(rng_stream, 2 * s), &r.ledger,
                                    opts.truncate_after_first_zero);
        r.strong_est = label_solution(prob, sol, strong, opts.rollouts_t,
                                      derive_rng_stream(rng_stream, 2 * s + 1),
                                      &r.ledger, opts.truncate_after_first_zero);
        return r;
      });

  FilteredDataset out;
  const std::vector<std::string> pair_names{weak.name, strong.name};
  for (std::size_t s = 0; s < per.size(); ++s) {
    const Solution& sol = solutions[s];
    const PerSolution& r = per[s];
    out.ledger.merge(r.ledger);
    for (std::size_t i = 0; i < r.weak_est.size(); ++i)
      out.weak_all.push_back(make_record(sol.problem_id, static_cast<int>(s),
                                         static_cast<int>(i), r.weak_est[i],
                                         "single-completer", {weak.name}));
    for (std::size_t i = 0; i < r.strong_est.size(); ++i)
      out.strong_all.push_back(make_record(sol.problem_id, static_cast<int>(s),
                                           static_cast<int>(i), r.strong_est[i],
                                           "single-completer", {strong.name}));
    // with truncation the two passes may stop at different steps; filter
    // over the span both labeled
    const std::size_t common = std::min(r.weak_est.size(), r.strong_est.size());
    std::vector<LabeledStepRecord> agreed;
    for (std::size_t i = 0; i < common; ++i) {
      if (r.weak_est[i].hard != r.strong_est[i].hard) continue;
      // keep the strong completer's soft estimate alongside the agreed hard label
      agreed.push_back(make_record(sol.problem_id, static_cast<int>(s),
                                   static_cast<int>(i), r.strong_est[i],
                                   "consistency-kept", pair_names));
    }
    if (static_cast<int>(agreed.size()) >= opts.retention_min)
      for (auto& rec : agreed) out.kept.push_back(std::move(rec));
  }
  return out;
}

std::vector<LabeledStepRecord> label_dataset(const std::vector<Problem>& problems,
                                             const std::vector<Solution>& solutions,
                                             const CompleterConfig& completer,
                                             const LabelOptions& opts,
                                             std::uint64_t rng_stream,
                                             CostLedger* ledger, int worker_count) {
  validate(opts);
  const auto by_id = index_problems(problems);

  struct PerSolution {
    std::vector<StepLabelEstimate> est;
    CostLedger ledger;
  };
  const auto per = parallel_map<PerSolution>(
      solutions.size(), worker_count, [&](std::size_t s) {
        const Solution& sol = solutions[s];
        const Problem& prob = problem_for(by_id, sol.problem_id);
        PerSolution r;
        r.est = label_solution(prob, sol, completer, opts.rollouts_t,
                               derive_rng_stream(rng_stream, s), &r.ledger,
                               opts.truncate_after_first_zero);
        return r;
      });

  std::vector<LabeledStepRecord> out;
  for (std::size_t s = 0; s < per.size(); ++s) {
    if (ledger) ledger->merge(per[s].ledger);
    for (std::size_t i = 0; i < per[s].est.size(); ++i)
      out.push_back(make_record(solutions[s].problem_id, static_cast<int>(s),
                                static_cast<int>(i), per[s].est[i],
                                "single-completer", {completer.name}));
  }
  return out;
}

double label_accuracy(const std::vector<LabeledStepRecord>& records,
                      const std::vector<Solution>& solutions) {
  if (records.empty()) throw std::invalid_argument("no records");
  std::int64_t hits = 0;
  for (const auto& r : records) {
    if (r.solution_index < 0 ||
        r.solution_index >= static_cast<int>(solutions.size()))
      throw std::invalid_argument("solution_index out of range");
    const Solution& sol = solutions[static_cast<std::size_t>(r.solution_index)];
    if (r.step_index < 0 || r.step_index >= static_cast<int>(sol.steps.size()))
      throw std::invalid_argument("step_index out of range");
    const auto& truth = sol.steps[static_cast<std::size_t>(r.step_index)].truth_label;
    if (!truth) throw std::runtime_error("ground truth unavailable");
    const int truth_bit = *truth == TruthLabel::correct ? 1 : 0;
    if (r.label == truth_bit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

}  // namespace prmkit::label
