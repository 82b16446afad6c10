#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "prmkit/types.hpp"

namespace prmkit::sim {

struct SimulatorConfig {
  int feature_dim = kDefaultFeatureDim;
  double feature_noise = 1.0;        // stddev of gaussian noise on step features
  double step_error_rate = 0.22;     // per-step probability the policy errs
  std::array<int, 2> plan_length_range{3, 8};
  std::array<double, 2> difficulty_range{0.1, 0.9};
};

void validate(const SimulatorConfig& cfg);

struct RolloutOutcome {
  std::string final_answer;
  bool correct = false;   // answers_equal(final_answer, golden)
  int steps_generated = 0;
};

// clamp(p_solve_base - difficulty_slope * difficulty, 0, 1)
double effective_solve_rate(const CompleterConfig& agent, double difficulty);

// Problems are arithmetic chains: a start value and plan_length operations
// (add/subtract/multiply). The chain is a pure function of (seed,
// plan_length), so any holder of the problem can replay it; plan_length and
// difficulty are drawn from a separate stream so they depend only on
// (seed, config ranges).
Problem generate_problem(std::uint64_t seed, const SimulatorConfig& cfg);

// Samples one solution from the two-knob policy: each step goes wrong
// independently with cfg.step_error_rate, the final answer is correct with
// effective_solve_rate on a clean trace and policy.p_recover otherwise.
// Steps carry truth labels and gaussian feature vectors whose signal
// direction encodes step correctness. outcome_label is always set and
// matches answers_equal(final_answer, golden_answer).
Solution policy_sample(const Problem& problem, const SimulatorConfig& cfg,
                       const CompleterConfig& policy, std::uint64_t rng_stream);

// Completes from prefix (the sampled steps up to AND including the step
// under test). Every prefix step must carry a truth label, else
// runtime_error "rollout requires simulator-labeled prefix". The outcome is
// correct with effective_solve_rate when the prefix is clean and p_recover
// when it contains an error. completer.seed_offset is folded into the
// stream, so distinct completers draw independently from the same stream.
RolloutOutcome completer_rollout(const Problem& problem, std::span<const Step> prefix,
                                 const CompleterConfig& completer,
                                 std::uint64_t rng_stream);

}  // namespace prmkit::sim
