#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "prmkit/label.hpp"
#include "prmkit/types.hpp"

namespace prmkit::score {

// Logistic step scorer: reward = sigmoid(w . features + bias).
struct ScorerParams {
  std::vector<double> weights;
  double bias = 0.0;
};

enum class Aggregation { minimum, last, product };

Aggregation parse_aggregation(const std::string& name);  // "min"/"minimum", "last", "product"
std::string to_string(Aggregation a);

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 0;  // shuffle stream
};

void validate(const TrainConfig& cfg);

// One training example: a sequence of steps with {0,1} targets. An
// outcome-level example is a whole solution with its outcome broadcast to
// every step; a step-level example is a single labeled step.
struct TrainExample {
  std::vector<std::vector<double>> features;  // one vector per step
  std::vector<int> labels;                    // same length
};

double sigmoid(double z);

// Cross-entropy of a single reward against a {0,1} target. The reward must
// lie strictly inside (0,1); throws domain_error "reward out of open
// interval" otherwise.
double orm_loss(double reward, int delta);

// Sum (not mean) of per-step cross-entropies over one example.
double prm_loss(std::span<const double> rewards, std::span<const int> labels);

// P(+) from a two-logit head: sigmoid(logit_plus - logit_minus).
double logits_to_step_reward(double logit_plus, double logit_minus);

// Solution-level reward from step rewards; input must be non-empty.
double aggregate(std::span<const double> rewards, Aggregation strategy);

double score_step(const ScorerParams& params, std::span<const double> features);
std::vector<double> score_solution(const ScorerParams& params, const Solution& solution);

struct Gradient {
  std::vector<double> weights;
  double bias = 0.0;
};

// Gradient of the mean example loss over the batch: per example the usual
// logistic terms (sigmoid - label) summed over its steps, then averaged
// across examples.
Gradient gradient(const ScorerParams& params, std::span<const TrainExample> batch);

double batch_loss(const ScorerParams& params, std::span<const TrainExample> batch);

struct TrainResult {
  ScorerParams params;
  std::vector<double> loss_trace;  // full-set loss before training and after each epoch
};

// Minibatch gradient descent from zero-initialized parameters with a
// seeded per-epoch shuffle. learning_rate 0 is a valid no-op.
TrainResult train(const std::vector<TrainExample>& examples, const TrainConfig& cfg);

// Same optimizer seeded from explicit initial parameters.
TrainResult train_from(const ScorerParams& initial,
                       const std::vector<TrainExample>& examples,
                       const TrainConfig& cfg);

// Outcome-initialized step training: phase 1 fits outcome-level examples
// from zeros, phase 2 continues on step-level examples from the phase-1
// parameters. Either set empty is an error ("empty phase-1 set" / "empty
// phase-2 set"). The loss trace is the concatenation of both phases.
TrainResult train_two_phase(const std::vector<TrainExample>& outcome_examples,
                            const std::vector<TrainExample>& step_examples,
                            const TrainConfig& cfg);

// Whole solutions with outcome_label broadcast to every step.
std::vector<TrainExample> make_outcome_examples(const std::vector<Solution>& solutions);

// One single-step example per labeled step record (so upsampled duplicates
// weigh the optimizer accordingly).
std::vector<TrainExample> make_step_examples(
    const std::vector<label::LabeledStepRecord>& records,
    const std::vector<Solution>& solutions);

// --- serialization -----------------------------------------------------------

inline void to_json(nlohmann::json& j, const ScorerParams& p) {
  j = nlohmann::json{{"weights", p.weights}, {"bias", p.bias}};
}

inline void from_json(const nlohmann::json& j, ScorerParams& p) {
  j.at("weights").get_to(p.weights);
  j.at("bias").get_to(p.bias);
}

}  // namespace prmkit::score
