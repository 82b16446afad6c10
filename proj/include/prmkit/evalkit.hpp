#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prmkit/curate.hpp"
#include "prmkit/score.hpp"
#include "prmkit/simulate.hpp"
#include "prmkit/types.hpp"

namespace prmkit::evalkit {

enum class SelectorKind { zero_shot, self_consistency, orm_rank, prm_rank, pass_at_n };

SelectorKind parse_selector(const std::string& name);
std::string to_string(SelectorKind kind);

struct Selector {
  SelectorKind kind = SelectorKind::zero_shot;
  score::Aggregation aggregation = score::Aggregation::minimum;  // prm_rank only
};

// Step rewards for a candidate solution. Ranking selectors take one of
// these so trained parameters and the truth-label oracle rank through the
// same code path.
using StepRewardFn = std::function<std::vector<double>(const Solution&)>;

StepRewardFn scorer_fn(score::ScorerParams params);

// 0.99 for steps whose truth label is correct, 0.01 otherwise; throws
// "ground truth unavailable" on unlabeled steps.
StepRewardFn oracle_reward_fn();

// Winning equivalence class by count; ties go to the class seen first.
// Returns the first answer of the winning class verbatim.
std::string majority_vote(const std::vector<std::string>& answers);

// Index of the selected candidate. zero_shot takes index 0;
// self_consistency the majority answer's first holder; orm_rank the
// highest last-step reward; prm_rank the highest aggregated step reward;
// pass_at_n the first correct candidate (falling back to 0), an oracle
// upper bound. Score ties resolve to the lowest index.
std::size_t best_of_n_index(const Problem& problem,
                            const std::vector<Solution>& candidates,
                            const Selector& selector, const StepRewardFn& rewards);

const Solution& best_of_n(const Problem& problem,
                          const std::vector<Solution>& candidates,
                          const Selector& selector, const StepRewardFn& rewards);

struct EvalResult {
  std::vector<double> per_run;  // accuracy per independent run
  double mean = 0.0;
  double stddev = 0.0;  // population stddev over runs
};

// Samples run_cfg.bon_n policy solutions per problem per run, selects one,
// and scores accuracy against the golden answers; repeats for
// run_cfg.num_eval_runs independent runs. Deterministic in
// run_cfg.master_seed for every worker_count.
EvalResult evaluate(const std::vector<Problem>& problems,
                    const sim::SimulatorConfig& sim_cfg, const CompleterConfig& policy,
                    const Selector& selector, const StepRewardFn& rewards,
                    const RunConfig& run_cfg);

// Same, sweeping candidate-set sizes over one shared sample pool per run:
// the size-n candidate set is a prefix of the size-max(ns) set, so
// pass_at_n accuracy is monotone in n run by run. Result i belongs to
// ns[i].
std::vector<EvalResult> evaluate_multi_n(const std::vector<Problem>& problems,
                                         const sim::SimulatorConfig& sim_cfg,
                                         const CompleterConfig& policy,
                                         const Selector& selector,
                                         const StepRewardFn& rewards,
                                         const RunConfig& run_cfg,
                                         std::span<const int> ns);

// --- judge metrics -------------------------------------------------------------

struct F1Counts {
  std::int64_t tp = 0, fp = 0, fn = 0;
};

F1Counts f1_counts(std::span<const int> predicted, std::span<const int> truth);

// F1 of the positive class; 0 when precision + recall is 0.
double f1_from_counts(const F1Counts& c);
double judge_f1(std::span<const int> predicted, std::span<const int> truth);

// Unweighted mean of per-subset F1 scores.
double macro_f1(std::span<const double> per_subset);

// F1 of the pooled counts across subsets.
double micro_f1(std::span<const F1Counts> per_subset);

// 1 where the scored step reward is >= 0.5.
std::vector<int> predict_step_labels(const score::ScorerParams& params,
                                     const Solution& solution);

// --- rejection-sampling selection ------------------------------------------------

struct RaftRules {
  int min_correct = 2;  // window on the pre-dedup correct count
  int max_correct = 6;
};

void validate(const RaftRules& rules);

// Keeps the problem only when the number of correct candidates (pre-dedup)
// falls inside [min_correct, max_correct]; deduplicates the correct subset
// with the n-gram rules, then returns the correct candidate with the
// highest aggregated step reward. nullopt = problem skipped.
std::optional<Solution> raft_select(const Problem& problem,
                                    const std::vector<Solution>& candidates,
                                    const StepRewardFn& rewards,
                                    score::Aggregation aggregation,
                                    const curate::FilterRules& filter_rules,
                                    const RaftRules& raft_rules = {});

}  // namespace prmkit::evalkit
