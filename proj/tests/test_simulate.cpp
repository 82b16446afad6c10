#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prmkit/jsonl.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/simulate.hpp"
#include "prmkit/verify.hpp"

using namespace prmkit;
using namespace prmkit::sim;

namespace {

const SimulatorConfig kCfg;  // defaults

CompleterConfig agent(double base, double slope, double recover) {
  CompleterConfig c;
  c.name = "agent";
  c.p_solve_base = base;
  c.difficulty_slope = slope;
  c.p_recover = recover;
  return c;
}

}  // namespace

TEST_CASE("config validation guards the knob ranges") {
  CHECK_NOTHROW(validate(kCfg));
  SimulatorConfig bad = kCfg;
  bad.step_error_rate = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = kCfg;
  bad.feature_dim = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = kCfg;
  bad.plan_length_range = {5, 3};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = kCfg;
  bad.difficulty_range = {0.8, 0.2};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = kCfg;
  bad.feature_noise = -1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("effective solve rate is the clamped linear form") {
  CHECK(effective_solve_rate(agent(0.8, 0.5, 0.0), 0.4) == 0.8 - 0.5 * 0.4);
  CHECK(effective_solve_rate(agent(0.3, 1.0, 0.0), 0.9) == 0.0);  // clamped low
  CHECK(effective_solve_rate(agent(1.0, 0.0, 0.0), 0.5) == 1.0);
}

TEST_CASE("problems are a pure function of their seed") {
  const Problem a = generate_problem(1234, kCfg);
  const Problem b = generate_problem(1234, kCfg);
  CHECK(json(a) == json(b));
  const Problem c = generate_problem(1235, kCfg);
  CHECK(a.id != c.id);

  CHECK(a.plan_length >= kCfg.plan_length_range[0]);
  CHECK(a.plan_length <= kCfg.plan_length_range[1]);
  CHECK(a.difficulty >= kCfg.difficulty_range[0]);
  CHECK(a.difficulty <= kCfg.difficulty_range[1]);
  CHECK(a.prompt.find("Start with") != std::string::npos);
  CHECK(a.seed == 1234);
  // golden answers are integers in this domain
  CHECK(verify::canonicalize(a.golden_answer).kind == verify::AnswerKind::integer);
}

TEST_CASE("sampled solutions replay bit-identically from their stream") {
  const Problem p = generate_problem(42, kCfg);
  const CompleterConfig pol = agent(0.9, 0.2, 0.1);
  const Solution s1 = policy_sample(p, kCfg, pol, 777);
  const Solution s2 = policy_sample(p, kCfg, pol, 777);
  CHECK(json(s1) == json(s2));
  const Solution s3 = policy_sample(p, kCfg, pol, 778);
  CHECK(json(s1) != json(s3));
}

TEST_CASE("solutions carry full simulator annotations") {
  const Problem p = generate_problem(7, kCfg);
  const Solution s = policy_sample(p, kCfg, agent(0.9, 0.2, 0.1), 99);
  CHECK(s.problem_id == p.id);
  CHECK(static_cast<int>(s.steps.size()) == p.plan_length);
  REQUIRE(s.outcome_label.has_value());
  for (const auto& st : s.steps) {
    CHECK_FALSE(st.text.empty());
    CHECK(static_cast<int>(st.features.size()) == kCfg.feature_dim);
    CHECK(st.truth_label.has_value());
  }
}

TEST_CASE("outcome labels always agree with answer equivalence") {
  int correct = 0;
  for (int i = 0; i < 1000; ++i) {
    const Problem p = generate_problem(derive_rng_stream(5, i), kCfg);
    const Solution s =
        policy_sample(p, kCfg, agent(0.7, 0.3, 0.2), derive_rng_stream(6, i));
    REQUIRE(s.outcome_label.has_value());
    CHECK(*s.outcome_label ==
          (verify::answers_equal(s.final_answer, p.golden_answer) ? 1 : 0));
    correct += *s.outcome_label;
  }
  CHECK(correct > 0);  // both outcomes occur
  CHECK(correct < 1000);
}

TEST_CASE("degenerate error rates produce all-clean or all-errored traces") {
  SimulatorConfig clean = kCfg;
  clean.step_error_rate = 0.0;
  SimulatorConfig broken = kCfg;
  broken.step_error_rate = 1.0;
  for (int i = 0; i < 50; ++i) {
    const Problem p = generate_problem(derive_rng_stream(8, i), clean);
    const Solution sc =
        policy_sample(p, clean, agent(0.8, 0.0, 0.2), derive_rng_stream(9, i));
    for (const auto& st : sc.steps) CHECK(*st.truth_label == TruthLabel::correct);
    const Solution sb =
        policy_sample(p, broken, agent(0.8, 0.0, 0.2), derive_rng_stream(10, i));
    for (const auto& st : sb.steps) CHECK(*st.truth_label == TruthLabel::incorrect);
  }
}

TEST_CASE("a clean trace ends at the plan's own final value") {
  SimulatorConfig clean = kCfg;
  clean.step_error_rate = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Problem p = generate_problem(derive_rng_stream(12, i), clean);
    const Solution s =
        policy_sample(p, clean, agent(1.0, 0.0, 0.0), derive_rng_stream(13, i));
    // p_solve 1.0 on a clean trace: the stated answer is the golden one
    CHECK(*s.outcome_label == 1);
    CHECK(verify::answers_equal(s.final_answer, p.golden_answer));
    // and the last step's shown value is that answer
    CHECK(s.steps.back().text.find(p.golden_answer) != std::string::npos);
  }
}

TEST_CASE("the step error rate is matched empirically at the defaults") {
  int errors = 0, steps = 0;
  for (int i = 0; i < 2000; ++i) {
    const Problem p = generate_problem(derive_rng_stream(21, i), kCfg);
    const Solution s =
        policy_sample(p, kCfg, agent(0.8, 0.2, 0.1), derive_rng_stream(22, i));
    for (const auto& st : s.steps) {
      ++steps;
      errors += *st.truth_label == TruthLabel::incorrect ? 1 : 0;
    }
  }
  REQUIRE(steps >= 10000);
  const double rate = static_cast<double>(errors) / steps;
  CHECK(std::abs(rate - kCfg.step_error_rate) < 0.02);
}

TEST_CASE("step features point along the signal direction by label") {
  // With unit noise the signal half of the feature vector averages +1 on
  // correct steps and -1 on erroneous ones.
  double sum_correct = 0.0, sum_incorrect = 0.0;
  int n_correct = 0, n_incorrect = 0;
  for (int i = 0; i < 500; ++i) {
    const Problem p = generate_problem(derive_rng_stream(31, i), kCfg);
    const Solution s =
        policy_sample(p, kCfg, agent(0.8, 0.2, 0.1), derive_rng_stream(32, i));
    for (const auto& st : s.steps) {
      double mean_signal = 0.0;
      const int half = kCfg.feature_dim / 2;
      for (int d = 0; d < half; ++d) mean_signal += st.features[d];
      mean_signal /= half;
      if (*st.truth_label == TruthLabel::correct) {
        sum_correct += mean_signal;
        ++n_correct;
      } else {
        sum_incorrect += mean_signal;
        ++n_incorrect;
      }
    }
  }
  REQUIRE(n_correct > 100);
  REQUIRE(n_incorrect > 100);
  CHECK(sum_correct / n_correct > 0.5);
  CHECK(sum_incorrect / n_incorrect < -0.5);
}

TEST_CASE("rollouts demand a labeled prefix") {
  const Problem p = generate_problem(3, kCfg);
  Solution s = policy_sample(p, kCfg, agent(0.8, 0.2, 0.1), 4);
  s.steps[0].truth_label.reset();
  CHECK_THROWS_WITH_AS(
      completer_rollout(p, std::span<const Step>(s.steps.data(), 1), agent(0.8, 0.2, 0.1), 5),
      "rollout requires simulator-labeled prefix", std::runtime_error);
}

TEST_CASE("rollouts replay deterministically and respect completer identity") {
  const Problem p = generate_problem(17, kCfg);
  const Solution s = policy_sample(p, kCfg, agent(0.8, 0.2, 0.1), 18);
  const std::span<const Step> prefix(s.steps.data(), 1);
  CompleterConfig a = agent(0.9, 0.1, 0.2);
  const RolloutOutcome r1 = completer_rollout(p, prefix, a, 55);
  const RolloutOutcome r2 = completer_rollout(p, prefix, a, 55);
  CHECK(r1.final_answer == r2.final_answer);
  CHECK(r1.correct == r2.correct);
  CHECK(r1.steps_generated == r2.steps_generated);
  CHECK(r1.steps_generated == std::max(1, p.plan_length - 1));

  CompleterConfig b = a;
  b.seed_offset = 99;  // distinct completer, same stream: independent draws
  bool diverged = false;
  for (int i = 0; i < 200 && !diverged; ++i) {
    const RolloutOutcome ra = completer_rollout(p, prefix, a, derive_rng_stream(60, i));
    const RolloutOutcome rb = completer_rollout(p, prefix, b, derive_rng_stream(60, i));
    diverged = ra.correct != rb.correct;
  }
  CHECK(diverged);
}

namespace {

// A solution whose first step is forced wrong: sample under error rate 1,
// then keep just the first step as the prefix.
Solution errored_prefix_solution(const Problem& p, std::uint64_t stream) {
  SimulatorConfig broken = kCfg;
  broken.step_error_rate = 1.0;
  return policy_sample(p, broken, agent(0.8, 0.0, 0.2), stream);
}

double recovery_rate(const Problem& p, const Solution& s, double p_recover,
                     int rollouts, std::uint64_t base) {
  const CompleterConfig c = agent(0.9, 0.0, p_recover);
  int hits = 0;
  for (int j = 0; j < rollouts; ++j) {
    const auto r = completer_rollout(p, std::span<const Step>(s.steps.data(), 1), c,
                                     derive_rng_stream(base, j));
    hits += r.correct ? 1 : 0;
  }
  return static_cast<double>(hits) / rollouts;
}

}  // namespace

TEST_CASE("degenerate recovery knobs pin rollout outcomes") {
  const Problem p = generate_problem(71, kCfg);
  const Solution s = errored_prefix_solution(p, 72);
  CHECK(recovery_rate(p, s, 0.0, 200, 73) == 0.0);
  CHECK(recovery_rate(p, s, 0.9, 2000, 74) > 0.8);

  // clean prefix, certain solver: always correct
  SimulatorConfig clean = kCfg;
  clean.step_error_rate = 0.0;
  const Problem p2 = generate_problem(75, clean);
  const Solution s2 = policy_sample(p2, clean, agent(1.0, 0.0, 0.0), 76);
  const CompleterConfig solver = agent(1.0, 0.0, 0.0);
  for (int j = 0; j < 100; ++j) {
    const auto r = completer_rollout(p2, std::span<const Step>(s2.steps.data(), 1),
                                     solver, derive_rng_stream(77, j));
    CHECK(r.correct);
  }
}

TEST_CASE("recovery rate is monotone in p_recover") {
  const Problem p = generate_problem(81, kCfg);
  const Solution s = errored_prefix_solution(p, 82);
  double prev = -1.0;
  for (double pr : {0.0, 0.2, 0.4, 0.6, 0.8}) {
    // shared streams: raising the knob can only flip outcomes one way
    const double rate = recovery_rate(p, s, pr, 1000, 83);
    CHECK(rate >= prev);
    prev = rate;
  }
}

TEST_CASE("strong and weak completers separate on an erroneous prefix") {
  const Problem p = generate_problem(91, kCfg);
  const Solution s = errored_prefix_solution(p, 92);
  const double strong = recovery_rate(p, s, 0.6, 1000, 93);
  const double weak = recovery_rate(p, s, 0.05, 1000, 94);
  CHECK(strong - weak >= 0.4);
}
