#include "prmkit/score.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "prmkit/rng.hpp"

namespace prmkit::score {
namespace {

void check_dims(const ScorerParams& params, std::span<const double> features) {
  if (params.weights.size() != features.size())
    throw std::invalid_argument("feature dim mismatch: scorer has " +
                                std::to_string(params.weights.size()) + ", step has " +
                                std::to_string(features.size()));
}

void check_example(const TrainExample& ex, std::size_t dim) {
  if (ex.features.size() != ex.labels.size())
    throw std::invalid_argument("features/labels length mismatch");
  if (ex.features.empty()) throw std::invalid_argument("example has no steps");
  for (const auto& f : ex.features)
    if (f.size() != dim) throw std::invalid_argument("feature dim mismatch");
  for (int y : ex.labels)
    if (y != 0 && y != 1) throw std::invalid_argument("label not in {0,1}");
}

std::size_t example_dim(const std::vector<TrainExample>& examples) {
  if (examples.empty()) throw std::invalid_argument("empty training data");
  if (examples.front().features.empty())
    throw std::invalid_argument("example has no steps");
  return examples.front().features.front().size();
}

}  // namespace

Aggregation parse_aggregation(const std::string& name) {
  if (name == "min" || name == "minimum") return Aggregation::minimum;
  if (name == "last") return Aggregation::last;
  if (name == "product") return Aggregation::product;
  throw std::invalid_argument("unknown aggregation: " + name);
}

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::minimum: return "minimum";
    case Aggregation::last: return "last";
    case Aggregation::product: return "product";
  }
  throw std::logic_error("unreachable");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double orm_loss(double reward, int delta) {
  if (delta != 0 && delta != 1) throw std::invalid_argument("label not in {0,1}");
  if (!(reward > 0.0 && reward < 1.0))
    throw std::domain_error("reward out of open interval");
  return -(delta * std::log(reward) + (1 - delta) * std::log(1.0 - reward));
}

double prm_loss(std::span<const double> rewards, std::span<const int> labels) {
  if (rewards.size() != labels.size())
    throw std::invalid_argument("rewards/labels length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    total += orm_loss(rewards[i], labels[i]);
  return total;
}

double logits_to_step_reward(double logit_plus, double logit_minus) {
  if (!std::isfinite(logit_plus) || !std::isfinite(logit_minus))
    throw std::invalid_argument("logit not finite");
  return sigmoid(logit_plus - logit_minus);
}

double aggregate(std::span<const double> rewards, Aggregation strategy) {
  if (rewards.empty()) throw std::invalid_argument("no rewards");
  switch (strategy) {
    case Aggregation::minimum: {
      double m = rewards[0];
      for (double r : rewards)
        if (r < m) m = r;
      return m;
    }
    case Aggregation::last:
      return rewards.back();
    case Aggregation::product: {
      double p = 1.0;
      for (double r : rewards) p *= r;
      return p;
    }
  }
  throw std::logic_error("unreachable");
}

double score_step(const ScorerParams& params, std::span<const double> features) {
  check_dims(params, features);
  double z = params.bias;
  for (std::size_t j = 0; j < features.size(); ++j) z += params.weights[j] * features[j];
  return sigmoid(z);
}

std::vector<double> score_solution(const ScorerParams& params, const Solution& solution) {
  std::vector<double> rewards;
  rewards.reserve(solution.steps.size());
  for (const Step& st : solution.steps) rewards.push_back(score_step(params, st.features));
  return rewards;
}

Gradient gradient(const ScorerParams& params, std::span<const TrainExample> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Gradient g;
  g.weights.assign(params.weights.size(), 0.0);
  for (const TrainExample& ex : batch) {
    check_example(ex, params.weights.size());
    for (std::size_t i = 0; i < ex.features.size(); ++i) {
      const double err = score_step(params, ex.features[i]) - ex.labels[i];
      for (std::size_t j = 0; j < g.weights.size(); ++j)
        g.weights[j] += err * ex.features[i][j];
      g.bias += err;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& w : g.weights) w *= inv;
  g.bias *= inv;
  return g;
}

double batch_loss(const ScorerParams& params, std::span<const TrainExample> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  // saturated scores can round to exactly 0 or 1; clamp so the training
  // loss stays finite instead of tripping the open-interval check
  double total = 0.0;
  for (const TrainExample& ex : batch) {
    check_example(ex, params.weights.size());
    double ex_loss = 0.0;
    for (std::size_t i = 0; i < ex.features.size(); ++i) {
      double r = score_step(params, ex.features[i]);
      r = std::min(1.0 - 1e-12, std::max(1e-12, r));
      ex_loss += orm_loss(r, ex.labels[i]);
    }
    total += ex_loss;
  }
  return total / static_cast<double>(batch.size());
}

TrainResult train_from(const ScorerParams& initial,
                       const std::vector<TrainExample>& examples,
                       const TrainConfig& cfg) {
  validate(cfg);
  const std::size_t dim = example_dim(examples);
  if (initial.weights.size() != dim)
    throw std::invalid_argument("feature dim mismatch");
  for (const auto& ex : examples) check_example(ex, dim);

  TrainResult result;
  result.params = initial;
  result.loss_trace.push_back(batch_loss(result.params, examples));

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainExample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_rng_stream(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      const Gradient g = gradient(result.params, batch);
      for (std::size_t j = 0; j < dim; ++j)
        result.params.weights[j] -= cfg.learning_rate * g.weights[j];
      result.params.bias -= cfg.learning_rate * g.bias;
    }
    result.loss_trace.push_back(batch_loss(result.params, examples));
  }
  return result;
}

TrainResult train(const std::vector<TrainExample>& examples, const TrainConfig& cfg) {
  ScorerParams zeros;
  zeros.weights.assign(example_dim(examples), 0.0);
  zeros.bias = 0.0;
  return train_from(zeros, examples, cfg);
}

TrainResult train_two_phase(const std::vector<TrainExample>& outcome_examples,
                            const std::vector<TrainExample>& step_examples,
                            const TrainConfig& cfg) {
  if (outcome_examples.empty()) throw std::invalid_argument("empty phase-1 set");
  if (step_examples.empty()) throw std::invalid_argument("empty phase-2 set");
  TrainConfig phase1 = cfg;
  phase1.seed = derive_rng_stream(cfg.seed, 0);
  TrainConfig phase2 = cfg;
  phase2.seed = derive_rng_stream(cfg.seed, 1);
  TrainResult first = train(outcome_examples, phase1);
  TrainResult second = train_from(first.params, step_examples, phase2);
  TrainResult out;
  out.params = std::move(second.params);
  out.loss_trace = std::move(first.loss_trace);
  out.loss_trace.insert(out.loss_trace.end(), second.loss_trace.begin(),
                        second.loss_trace.end());
  return out;
}

std::vector<TrainExample> make_outcome_examples(const std::vector<Solution>& solutions) {
  std::vector<TrainExample> out;
  out.reserve(solutions.size());
  for (const Solution& sol : solutions) {
    if (!sol.outcome_label) throw std::runtime_error("missing outcome_label");
    if (sol.steps.empty()) throw std::invalid_argument("solution has no steps");
    TrainExample ex;
    for (const Step& st : sol.steps) {
      ex.features.push_back(st.features);
      ex.labels.push_back(*sol.outcome_label);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainExample> make_step_examples(
    const std::vector<label::LabeledStepRecord>& records,
    const std::vector<Solution>& solutions) {
  std::vector<TrainExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.solution_index < 0 || r.solution_index >= static_cast<int>(solutions.size()))
      throw std::invalid_argument("solution_index out of range");
    const Solution& sol = solutions[static_cast<std::size_t>(r.solution_index)];
    if (r.step_index < 0 || r.step_index >= static_cast<int>(sol.steps.size()))
      throw std::invalid_argument("step_index out of range");
    TrainExample ex;
    ex.features.push_back(sol.steps[static_cast<std::size_t>(r.step_index)].features);
    ex.labels.push_back(r.label);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace prmkit::score
