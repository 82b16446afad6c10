#include "prmkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "prmkit/parallel.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/verify.hpp"

namespace prmkit::evalkit {
namespace {

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

std::size_t argmax_lowest(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace

SelectorKind parse_selector(const std::string& name) {
  if (name == "zero-shot") return SelectorKind::zero_shot;
  if (name == "self-consistency") return SelectorKind::self_consistency;
  if (name == "orm-rank" || name == "orm") return SelectorKind::orm_rank;
  if (name == "prm-rank" || name == "prm") return SelectorKind::prm_rank;
  if (name == "pass-at-n") return SelectorKind::pass_at_n;
  throw std::invalid_argument("unknown selector: " + name);
}

std::string to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::zero_shot: return "zero-shot";
    case SelectorKind::self_consistency: return "self-consistency";
    case SelectorKind::orm_rank: return "orm-rank";
    case SelectorKind::prm_rank: return "prm-rank";
    case SelectorKind::pass_at_n: return "pass-at-n";
  }
  throw std::logic_error("unreachable");
}

StepRewardFn scorer_fn(score::ScorerParams params) {
  return [params = std::move(params)](const Solution& sol) {
    return score::score_solution(params, sol);
  };
}

StepRewardFn oracle_reward_fn() {
  return [](const Solution& sol) {
    std::vector<double> rewards;
    rewards.reserve(sol.steps.size());
    for (const Step& st : sol.steps) {
      if (!st.truth_label) throw std::runtime_error("ground truth unavailable");
      rewards.push_back(*st.truth_label == TruthLabel::correct ? 0.99 : 0.01);
    }
    return rewards;
  };
}

std::string majority_vote(const std::vector<std::string>& answers) {
  if (answers.empty()) throw std::invalid_argument("no answers");
  struct Class {
    std::size_t count = 0;
    std::size_t first = 0;  // index of first member
  };
  std::unordered_map<std::string, Class> classes;
  std::vector<std::string> keys(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    keys[i] = verify::canonical_key(verify::canonicalize(answers[i]));
    auto [it, inserted] = classes.try_emplace(keys[i]);
    if (inserted) it->second.first = i;
    ++it->second.count;
  }
  std::size_t winner = 0;  // index of the representative answer
  const Class* best = nullptr;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const Class& c = classes[keys[i]];
    if (c.first != i) continue;  // visit each class once, in first-seen order
    if (!best || c.count > best->count) {
      best = &c;
      winner = i;
    }
  }
  return answers[winner];
}

std::size_t best_of_n_index(const Problem& problem,
                            const std::vector<Solution>& candidates,
                            const Selector& selector, const StepRewardFn& rewards) {
  if (candidates.empty()) throw std::invalid_argument("no candidates");
  switch (selector.kind) {
    case SelectorKind::zero_shot:
      return 0;
    case SelectorKind::self_consistency: {
      std::vector<std::string> answers;
      answers.reserve(candidates.size());
      for (const Solution& s : candidates) answers.push_back(s.final_answer);
      const std::string winning = majority_vote(answers);
      const auto key = verify::canonical_key(verify::canonicalize(winning));
      for (std::size_t i = 0; i < candidates.size(); ++i)
        if (verify::canonical_key(verify::canonicalize(answers[i])) == key) return i;
      throw std::logic_error("majority answer not among candidates");
    }
    case SelectorKind::orm_rank:
    case SelectorKind::prm_rank: {
      if (!rewards) throw std::invalid_argument("selector requires a scorer");
      std::vector<double> scores;
      scores.reserve(candidates.size());
      for (const Solution& s : candidates) {
        const std::vector<double> r = rewards(s);
        scores.push_back(selector.kind == SelectorKind::orm_rank
                             ? score::aggregate(r, score::Aggregation::last)
                             : score::aggregate(r, selector.aggregation));
      }
      return argmax_lowest(scores);
    }
    case SelectorKind::pass_at_n: {
      for (std::size_t i = 0; i < candidates.size(); ++i)
        if (verify::answers_equal(candidates[i].final_answer, problem.golden_answer))
          return i;
      return 0;
    }
  }
  throw std::logic_error("unreachable");
}

const Solution& best_of_n(const Problem& problem,
                          const std::vector<Solution>& candidates,
                          const Selector& selector, const StepRewardFn& rewards) {
  return candidates[best_of_n_index(problem, candidates, selector, rewards)];
}

std::vector<EvalResult> evaluate_multi_n(const std::vector<Problem>& problems,
                                         const sim::SimulatorConfig& sim_cfg,
                                         const CompleterConfig& policy,
                                         const Selector& selector,
                                         const StepRewardFn& rewards,
                                         const RunConfig& run_cfg,
                                         std::span<const int> ns) {
  validate(run_cfg);
  if (problems.empty()) throw std::invalid_argument("no problems");
  if (ns.empty()) throw std::invalid_argument("no candidate-set sizes");
  int max_n = 0;
  for (int n : ns) {
    if (n < 1) throw std::invalid_argument("candidate-set size must be >= 1");
    max_n = std::max(max_n, n);
  }

  std::vector<EvalResult> results(ns.size());
  for (auto& r : results) r.per_run.assign(static_cast<std::size_t>(run_cfg.num_eval_runs), 0.0);

  for (int run = 0; run < run_cfg.num_eval_runs; ++run) {
    const std::uint64_t run_stream =
        derive_rng_stream(run_cfg.master_seed, static_cast<std::uint64_t>(run));
    // hits[i][p] = 1 when the selector picked a correct solution for
    // problem p with candidate-set size ns[i]
    const auto hits = parallel_map<std::vector<char>>(
        problems.size(), run_cfg.worker_count, [&](std::size_t p) {
          const std::uint64_t prob_stream = derive_rng_stream(run_stream, p);
          std::vector<Solution> pool;
          pool.reserve(static_cast<std::size_t>(max_n));
          for (int k = 0; k < max_n; ++k)
            pool.push_back(sim::policy_sample(
                problems[p], sim_cfg, policy,
                derive_rng_stream(prob_stream, static_cast<std::uint64_t>(k))));
          std::vector<char> hit(ns.size(), 0);
          for (std::size_t i = 0; i < ns.size(); ++i) {
            const std::vector<Solution> candidates(
                pool.begin(), pool.begin() + static_cast<std::size_t>(ns[i]));
            const Solution& chosen =
                best_of_n(problems[p], candidates, selector, rewards);
            hit[i] = verify::answers_equal(chosen.final_answer,
                                           problems[p].golden_answer)
                         ? 1
                         : 0;
          }
          return hit;
        });
    for (std::size_t i = 0; i < ns.size(); ++i) {
      std::int64_t correct = 0;
      for (const auto& h : hits) correct += h[i];
      results[i].per_run[static_cast<std::size_t>(run)] =
          static_cast<double>(correct) / static_cast<double>(problems.size());
    }
  }
  for (auto& r : results) {
    r.mean = mean_of(r.per_run);
    r.stddev = stddev_of(r.per_run, r.mean);
  }
  return results;
}

EvalResult evaluate(const std::vector<Problem>& problems,
                    const sim::SimulatorConfig& sim_cfg, const CompleterConfig& policy,
                    const Selector& selector, const StepRewardFn& rewards,
                    const RunConfig& run_cfg) {
  const int ns[1] = {run_cfg.bon_n};
  return evaluate_multi_n(problems, sim_cfg, policy, selector, rewards, run_cfg,
                          ns)[0];
}

F1Counts f1_counts(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("predicted/truth length mismatch");
  F1Counts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if ((predicted[i] != 0 && predicted[i] != 1) || (truth[i] != 0 && truth[i] != 1))
      throw std::invalid_argument("label not in {0,1}");
    if (predicted[i] == 1 && truth[i] == 1) ++c.tp;
    else if (predicted[i] == 1) ++c.fp;
    else if (truth[i] == 1) ++c.fn;
  }
  return c;
}

double f1_from_counts(const F1Counts& c) {
  const double p_den = static_cast<double>(c.tp + c.fp);
  const double r_den = static_cast<double>(c.tp + c.fn);
  const double precision = p_den > 0 ? static_cast<double>(c.tp) / p_den : 0.0;
  const double recall = r_den > 0 ? static_cast<double>(c.tp) / r_den : 0.0;
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double judge_f1(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw std::invalid_argument("no examples");
  return f1_from_counts(f1_counts(predicted, truth));
}

double macro_f1(std::span<const double> per_subset) {
  if (per_subset.empty()) throw std::invalid_argument("no subsets");
  double s = 0.0;
  for (double f : per_subset) s += f;
  return s / static_cast<double>(per_subset.size());
}

double micro_f1(std::span<const F1Counts> per_subset) {
  if (per_subset.empty()) throw std::invalid_argument("no subsets");
  F1Counts pooled;
  for (const auto& c : per_subset) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  return f1_from_counts(pooled);
}

std::vector<int> predict_step_labels(const score::ScorerParams& params,
                                     const Solution& solution) {
  std::vector<int> out;
  out.reserve(solution.steps.size());
  for (const double r : score::score_solution(params, solution))
    out.push_back(r >= 0.5 ? 1 : 0);
  return out;
}

void validate(const RaftRules& rules) {
  if (rules.min_correct < 0 || rules.max_correct < rules.min_correct)
    throw std::invalid_argument("bad correct-count window");
}

std::optional<Solution> raft_select(const Problem& problem,
                                    const std::vector<Solution>& candidates,
                                    const StepRewardFn& rewards,
                                    score::Aggregation aggregation,
                                    const curate::FilterRules& filter_rules,
                                    const RaftRules& raft_rules) {
  validate(raft_rules);
  if (!rewards) throw std::invalid_argument("selector requires a scorer");
  std::vector<Solution> correct;
  for (const Solution& s : candidates)
    if (verify::answers_equal(s.final_answer, problem.golden_answer))
      correct.push_back(s);
  const int n_correct = static_cast<int>(correct.size());
  if (n_correct < raft_rules.min_correct || n_correct > raft_rules.max_correct)
    return std::nullopt;
  const auto deduped = curate::ngram_dedup(correct, filter_rules);
  if (deduped.kept.empty()) return std::nullopt;
  std::vector<double> scores;
  scores.reserve(deduped.kept.size());
  for (const Solution& s : deduped.kept)
    scores.push_back(score::aggregate(rewards(s), aggregation));
  return deduped.kept[argmax_lowest(scores)];
}

}  // namespace prmkit::evalkit
