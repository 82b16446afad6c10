#include "prmkit/simulate.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "prmkit/digest.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/verify.hpp"

namespace prmkit::sim {
namespace {

// sub-stream indices under a problem seed
constexpr std::uint64_t kMetaStream = 0;  // plan_length, difficulty
constexpr std::uint64_t kPlanStream = 1;  // start value and operations

enum class OpKind { add, subtract, multiply };

struct Op {
  OpKind kind;
  std::int64_t operand;
};

struct HiddenPlan {
  std::int64_t start = 0;
  std::vector<Op> ops;
  std::vector<std::int64_t> values;  // values[i] = running value after i ops
};

std::string op_phrase(const Op& op) {
  switch (op.kind) {
    case OpKind::add: return "add " + std::to_string(op.operand);
    case OpKind::subtract: return "subtract " + std::to_string(op.operand);
    case OpKind::multiply: return "multiply by " + std::to_string(op.operand);
  }
  throw std::logic_error("unreachable");
}

std::int64_t apply_op(std::int64_t v, const Op& op) {
  switch (op.kind) {
    case OpKind::add: return v + op.operand;
    case OpKind::subtract: return v - op.operand;
    case OpKind::multiply: return v * op.operand;
  }
  throw std::logic_error("unreachable");
}

// Pure function of (seed, plan_length): replayable from the Problem record
// alone, whatever config generated it.
HiddenPlan derive_plan(std::uint64_t seed, int plan_length) {
  Rng rng(derive_rng_stream(seed, kPlanStream));
  HiddenPlan plan;
  plan.start = rng.next_int(2, 19);
  plan.values.push_back(plan.start);
  std::int64_t v = plan.start;
  for (int i = 0; i < plan_length; ++i) {
    const double r = rng.next_unit();
    Op op;
    if (r < 0.45) op = {OpKind::add, rng.next_int(1, 9)};
    else if (r < 0.90) op = {OpKind::subtract, rng.next_int(1, 9)};
    else op = {OpKind::multiply, rng.next_int(2, 3)};
    v = apply_op(v, op);
    plan.ops.push_back(op);
    plan.values.push_back(v);
  }
  return plan;
}

std::string render_prompt(const HiddenPlan& plan) {
  std::string out = "Start with " + std::to_string(plan.start) + ". Then ";
  for (std::size_t i = 0; i < plan.ops.size(); ++i) {
    if (i > 0) out += i + 1 == plan.ops.size() ? ", and then " : ", then ";
    out += op_phrase(plan.ops[i]);
  }
  out += ". What is the final value?";
  return out;
}

std::string render_step(Rng& rng, int index, const Op& op, std::int64_t shown) {
  const std::string phrase = op_phrase(op);
  const std::string value = std::to_string(shown);
  const std::string n = std::to_string(index + 1);
  switch (rng.next_below(3)) {
    case 0: return "Step " + n + ": " + phrase + ", giving " + value + ".";
    case 1: return "Next, " + phrase + "; the running value is " + value + ".";
    default: return "We " + phrase + " and get " + value + ".";
  }
}

// signal +/-1 in the first half of the vector, gaussian noise everywhere
std::vector<double> make_features(bool correct, const SimulatorConfig& cfg, Rng& rng) {
  std::vector<double> f(static_cast<std::size_t>(cfg.feature_dim));
  const double s = correct ? 1.0 : -1.0;
  for (int j = 0; j < cfg.feature_dim; ++j)
    f[static_cast<std::size_t>(j)] =
        (j < cfg.feature_dim / 2 ? s : 0.0) + cfg.feature_noise * rng.next_gaussian();
  return f;
}

std::int64_t perturb(std::int64_t v, Rng& rng) {
  std::int64_t d = rng.next_int(1, 9);
  if (rng.bernoulli(0.5)) d = -d;
  return v + d;
}

std::string wrong_answer_for(const std::string& golden, Rng& rng) {
  const auto canon = verify::canonicalize(golden);
  if (canon.is_numeric() && canon.den == 1)
    return std::to_string(perturb(canon.num, rng));
  return golden + "-wrong";
}

}  // namespace

void validate(const SimulatorConfig& cfg) {
  if (cfg.feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (cfg.feature_noise < 0.0) throw std::invalid_argument("feature_noise must be >= 0");
  if (cfg.step_error_rate < 0.0 || cfg.step_error_rate > 1.0)
    throw std::invalid_argument("step_error_rate out of [0,1]");
  if (cfg.plan_length_range[0] < 1 || cfg.plan_length_range[1] < cfg.plan_length_range[0])
    throw std::invalid_argument("bad plan_length_range");
  if (cfg.difficulty_range[0] < 0.0 || cfg.difficulty_range[1] > 1.0 ||
      cfg.difficulty_range[1] < cfg.difficulty_range[0])
    throw std::invalid_argument("bad difficulty_range");
}

double effective_solve_rate(const CompleterConfig& agent, double difficulty) {
  return std::clamp(agent.p_solve_base - agent.difficulty_slope * difficulty, 0.0, 1.0);
}

Problem generate_problem(std::uint64_t seed, const SimulatorConfig& cfg) {
  validate(cfg);
  Rng meta(derive_rng_stream(seed, kMetaStream));
  Problem p;
  p.seed = seed;
  p.id = "prob-" + hex64(seed);
  p.plan_length =
      static_cast<int>(meta.next_int(cfg.plan_length_range[0], cfg.plan_length_range[1]));
  p.difficulty = meta.next_in(cfg.difficulty_range[0], cfg.difficulty_range[1]);
  const HiddenPlan plan = derive_plan(seed, p.plan_length);
  p.golden_answer = std::to_string(plan.values.back());
  p.prompt = render_prompt(plan);
  return p;
}

Solution policy_sample(const Problem& problem, const SimulatorConfig& cfg,
                       const CompleterConfig& policy, std::uint64_t rng_stream) {
  validate(cfg);
  prmkit::validate(policy);
  if (problem.plan_length < 1) throw std::invalid_argument("plan_length must be >= 1");
  Rng rng(rng_stream);
  const HiddenPlan plan = derive_plan(problem.seed, problem.plan_length);

  Solution sol;
  sol.problem_id = problem.id;
  sol.source_policy = policy.name;
  bool any_error = false;
  for (int i = 0; i < problem.plan_length; ++i) {
    const bool err = rng.bernoulli(cfg.step_error_rate);
    any_error = any_error || err;
    std::int64_t shown = plan.values[static_cast<std::size_t>(i) + 1];
    if (err) shown = perturb(shown, rng);
    Step st;
    st.text = render_step(rng, i, plan.ops[static_cast<std::size_t>(i)], shown);
    st.truth_label = err ? TruthLabel::incorrect : TruthLabel::correct;
    st.features = make_features(!err, cfg, rng);
    sol.steps.push_back(std::move(st));
  }
  const double p = any_error ? policy.p_recover
                             : effective_solve_rate(policy, problem.difficulty);
  const bool solved = rng.bernoulli(p);
  sol.final_answer =
      solved ? problem.golden_answer : wrong_answer_for(problem.golden_answer, rng);
  sol.outcome_label = solved ? 1 : 0;
  return sol;
}

RolloutOutcome completer_rollout(const Problem& problem, std::span<const Step> prefix,
                                 const CompleterConfig& completer,
                                 std::uint64_t rng_stream) {
  prmkit::validate(completer);
  bool any_error = false;
  for (const Step& st : prefix) {
    if (!st.truth_label)
      throw std::runtime_error("rollout requires simulator-labeled prefix");
    any_error = any_error || *st.truth_label == TruthLabel::incorrect;
  }
  Rng rng(derive_rng_stream(rng_stream, completer.seed_offset));
  const double p = any_error ? completer.p_recover
                             : effective_solve_rate(completer, problem.difficulty);
  RolloutOutcome out;
  out.correct = rng.bernoulli(p);
  out.final_answer = out.correct ? problem.golden_answer
                                 : wrong_answer_for(problem.golden_answer, rng);
  out.steps_generated =
      std::max(1, problem.plan_length - static_cast<int>(prefix.size()));
  return out;
}

}  // namespace prmkit::sim
