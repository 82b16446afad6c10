#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prmkit {

inline constexpr int kDefaultFeatureDim = 8;

struct Problem {
  std::string id;
  std::string prompt;
  std::string golden_answer;
  double difficulty = 0.0;  // in [0, 1]
  int plan_length = 1;      // number of reasoning steps a correct solution takes
  std::uint64_t seed = 0;   // generator seed; the hidden plan is a pure function of it
};

// Simulator-only ground truth for a step. Absent on external data.
enum class TruthLabel { correct, incorrect };

// Monte Carlo estimate for one step.
// Invariants: rollouts >= 1, 0 <= correct_rollouts <= rollouts,
// soft == correct_rollouts / rollouts exactly, hard == (correct_rollouts >= 1).
struct StepLabelEstimate {
  double soft = 0.0;
  int hard = 0;
  int rollouts = 1;
  int correct_rollouts = 0;
};

inline StepLabelEstimate make_estimate(int rollouts, int correct_rollouts) {
  if (rollouts < 1) throw std::invalid_argument("T must be positive");
  if (correct_rollouts < 0 || correct_rollouts > rollouts)
    throw std::invalid_argument("correct_rollouts out of range");
  StepLabelEstimate e;
  e.rollouts = rollouts;
  e.correct_rollouts = correct_rollouts;
  e.soft = static_cast<double>(correct_rollouts) / static_cast<double>(rollouts);
  e.hard = correct_rollouts >= 1 ? 1 : 0;
  return e;
}

struct Step {
  std::string text;
  std::vector<double> features;
  std::optional<TruthLabel> truth_label;
  std::optional<StepLabelEstimate> estimated_label;
};

struct Solution {
  std::string problem_id;
  std::vector<Step> steps;
  std::string final_answer;
  std::optional<int> outcome_label;  // 1 = final answer matches golden, 0 = not
  std::string source_policy;
};

// Two-knob stochastic agent used both as the sampling policy and as a
// completer. On a clean prefix it solves with probability
// clamp(p_solve_base - difficulty_slope * difficulty, 0, 1); once an
// erroneous step is in the prefix it recovers with probability p_recover.
struct CompleterConfig {
  std::string name;
  double p_solve_base = 0.5;
  double difficulty_slope = 0.0;
  double p_recover = 0.0;  // must not exceed p_solve_base
  std::uint64_t seed_offset = 0;
};

inline void validate(const CompleterConfig& c) {
  if (c.p_solve_base < 0.0 || c.p_solve_base > 1.0)
    throw std::invalid_argument("p_solve_base out of [0,1]");
  if (c.p_recover < 0.0 || c.p_recover > 1.0)
    throw std::invalid_argument("p_recover out of [0,1]");
  if (c.difficulty_slope < 0.0)
    throw std::invalid_argument("difficulty_slope must be non-negative");
  if (c.p_recover > c.p_solve_base)
    throw std::invalid_argument("p_recover exceeds p_solve_base");
}

struct RunConfig {
  std::uint64_t master_seed = 0;
  int num_rollouts_t = 8;  // completions per step (T)
  int bon_n = 8;           // candidates per problem in best-of-N
  int raft_m = 8;          // candidates per problem in raft selection
  int num_eval_runs = 5;   // independent evaluation runs for mean/stddev
  int worker_count = 1;
};

inline void validate(const RunConfig& r) {
  if (r.num_rollouts_t < 1) throw std::invalid_argument("T must be positive");
  if (r.bon_n < 1) throw std::invalid_argument("bon_n must be positive");
  if (r.raft_m < 1) throw std::invalid_argument("raft_m must be positive");
  if (r.num_eval_runs < 1) throw std::invalid_argument("num_eval_runs must be positive");
  if (r.worker_count < 1) throw std::invalid_argument("worker_count must be positive");
}

}  // namespace prmkit
