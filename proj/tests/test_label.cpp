#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "prmkit/jsonl.hpp"
#include "prmkit/label.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/simulate.hpp"

using namespace prmkit;
using namespace prmkit::label;

namespace {

const sim::SimulatorConfig kCfg;

CompleterConfig agent(const std::string& name, double base, double slope,
                      double recover, std::uint64_t offset = 0) {
  CompleterConfig c;
  c.name = name;
  c.p_solve_base = base;
  c.difficulty_slope = slope;
  c.p_recover = recover;
  c.seed_offset = offset;
  return c;
}

struct Fixture {
  std::vector<Problem> problems;
  std::vector<Solution> solutions;
};

Fixture sample_fixture(int n_problems, int per_problem, std::uint64_t seed,
                       const CompleterConfig& policy,
                       const sim::SimulatorConfig& cfg = kCfg) {
  Fixture f;
  for (int i = 0; i < n_problems; ++i)
    f.problems.push_back(sim::generate_problem(derive_rng_stream(seed, i), cfg));
  std::uint64_t task = 1000000;
  for (const auto& p : f.problems)
    for (int s = 0; s < per_problem; ++s)
      f.solutions.push_back(
          sim::policy_sample(p, cfg, policy, derive_rng_stream(seed, task++)));
  return f;
}

}  // namespace

TEST_CASE("label options validate their ranges") {
  CHECK_NOTHROW(validate(LabelOptions{}));
  LabelOptions bad;
  bad.rollouts_t = 0;
  CHECK_THROWS_WITH_AS(validate(bad), "T must be positive", std::invalid_argument);
  bad = LabelOptions{};
  bad.retention_min = -1;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("monte carlo estimates match a hand-rolled replay of the rollouts") {
  // Estimator contract: completion j of step i draws from stream task j of
  // the step's stream. Replaying the same streams must reproduce the counts.
  const CompleterConfig completer = agent("c", 0.8, 0.2, 0.15);
  Rng seeds(404);
  for (int trial = 0; trial < 50; ++trial) {
    const Problem p = sim::generate_problem(seeds.next_u64(), kCfg);
    const Solution s = sim::policy_sample(p, kCfg, agent("pol", 0.8, 0.2, 0.1),
                                          seeds.next_u64());
    const int step = static_cast<int>(seeds.next_below(s.steps.size()));
    const int t = static_cast<int>(seeds.next_int(1, 16));
    const std::uint64_t stream = seeds.next_u64();

    const StepLabelEstimate est = mc_estimate(p, s, step, completer, t, stream);

    int correct = 0;
    for (int j = 0; j < t; ++j) {
      const auto r = sim::completer_rollout(
          p, std::span<const Step>(s.steps.data(), static_cast<std::size_t>(step) + 1),
          completer, derive_rng_stream(stream, static_cast<std::uint64_t>(j)));
      correct += r.correct ? 1 : 0;
    }
    CHECK(est.rollouts == t);
    CHECK(est.correct_rollouts == correct);
    CHECK(est.soft == static_cast<double>(correct) / t);
    CHECK(est.hard == (correct >= 1 ? 1 : 0));
  }
}

TEST_CASE("estimator rejects bad arguments") {
  const Problem p = sim::generate_problem(1, kCfg);
  const Solution s = sim::policy_sample(p, kCfg, agent("pol", 0.8, 0.2, 0.1), 2);
  const CompleterConfig c = agent("c", 0.8, 0.2, 0.1);
  CHECK_THROWS_WITH_AS(mc_estimate(p, s, 0, c, 0, 3), "T must be positive",
                       std::invalid_argument);
  CHECK_THROWS_AS(mc_estimate(p, s, -1, c, 4, 3), std::invalid_argument);
  CHECK_THROWS_AS(mc_estimate(p, s, static_cast<int>(s.steps.size()), c, 4, 3),
                  std::invalid_argument);
}

TEST_CASE("degenerate completers pin the estimates") {
  // All-errored prefix and no recovery: every completion fails.
  sim::SimulatorConfig broken = kCfg;
  broken.step_error_rate = 1.0;
  const Problem p = sim::generate_problem(11, broken);
  const Solution s = sim::policy_sample(p, broken, agent("pol", 0.8, 0.0, 0.2), 12);
  const StepLabelEstimate zero = mc_estimate(p, s, 0, agent("c", 0.8, 0.0, 0.0), 8, 13);
  CHECK(zero.soft == 0.0);
  CHECK(zero.hard == 0);

  // Clean prefix and a certain solver: every completion succeeds.
  sim::SimulatorConfig clean = kCfg;
  clean.step_error_rate = 0.0;
  const Problem p2 = sim::generate_problem(14, clean);
  const Solution s2 = sim::policy_sample(p2, clean, agent("pol", 1.0, 0.0, 0.0), 15);
  const StepLabelEstimate one = mc_estimate(p2, s2, 0, agent("c", 1.0, 0.0, 0.0), 8, 16);
  CHECK(one.soft == 1.0);
  CHECK(one.hard == 1);
}

TEST_CASE("soft estimates converge to the effective solve rate") {
  // Clean prefix, p_solve 0.5 at zero slope: soft estimate with T=10000
  // lands within two points of 0.5.
  sim::SimulatorConfig clean = kCfg;
  clean.step_error_rate = 0.0;
  const Problem p = sim::generate_problem(21, clean);
  const Solution s = sim::policy_sample(p, clean, agent("pol", 1.0, 0.0, 0.0), 22);
  const StepLabelEstimate est =
      mc_estimate(p, s, 0, agent("c", 0.5, 0.0, 0.0), 10000, 23);
  CHECK(std::abs(est.soft - 0.5) < 0.02);
}

TEST_CASE("the ledger counts every completion exactly") {
  const Problem p = sim::generate_problem(31, kCfg);
  const Solution s = sim::policy_sample(p, kCfg, agent("pol", 0.8, 0.2, 0.1), 32);
  const int k = static_cast<int>(s.steps.size());
  const CompleterConfig c = agent("c", 0.8, 0.2, 0.1);

  CostLedger one;
  mc_estimate(p, s, 0, c, 8, 33, &one);
  CHECK(one.completions_total == 8);
  CHECK(one.by_completer.at("c") == 8);

  CostLedger per_solution;
  const auto ests = label_solution(p, s, c, 8, 34, &per_solution);
  CHECK(static_cast<int>(ests.size()) == k);
  CHECK(per_solution.completions_total == 8 * k);
  CHECK(per_solution.by_completer.at("c") == 8 * k);

  CostLedger merged;
  merged.add("x", 5);
  merged.merge(per_solution);
  CHECK(merged.completions_total == 5 + 8 * k);
  CHECK(merged.by_completer.at("x") == 5);
}

TEST_CASE("truncation stops after the first hard zero") {
  sim::SimulatorConfig broken = kCfg;
  broken.step_error_rate = 1.0;
  const Problem p = sim::generate_problem(41, broken);
  const Solution s = sim::policy_sample(p, broken, agent("pol", 0.8, 0.0, 0.2), 42);
  REQUIRE(s.steps.size() >= 2);
  // no recovery: step 0 is hard-0, so the truncated pass stops there
  const CompleterConfig c = agent("c", 0.8, 0.0, 0.0);
  CostLedger full_ledger, trunc_ledger;
  const auto full = label_solution(p, s, c, 4, 43, &full_ledger, false);
  const auto trunc = label_solution(p, s, c, 4, 43, &trunc_ledger, true);
  CHECK(full.size() == s.steps.size());
  CHECK(trunc.size() == 1);
  CHECK(trunc[0].hard == 0);
  // truncation also saves completions
  CHECK(trunc_ledger.completions_total == 4);
  CHECK(full_ledger.completions_total == 4 * static_cast<std::int64_t>(s.steps.size()));
  // the shared span is identical (same streams per step)
  CHECK(full[0].correct_rollouts == trunc[0].correct_rollouts);
}

TEST_CASE("hard labels and estimate application round-trip") {
  const Problem p = sim::generate_problem(51, kCfg);
  Solution s = sim::policy_sample(p, kCfg, agent("pol", 0.8, 0.2, 0.1), 52);
  const auto ests = label_solution(p, s, agent("c", 0.8, 0.2, 0.15), 4, 53);
  const auto hard = hard_labels(ests);
  REQUIRE(hard.size() == ests.size());
  for (std::size_t i = 0; i < hard.size(); ++i) CHECK(hard[i] == ests[i].hard);

  apply_estimates(s, ests);
  for (std::size_t i = 0; i < ests.size(); ++i) {
    REQUIRE(s.steps[i].estimated_label.has_value());
    CHECK(s.steps[i].estimated_label->soft == ests[i].soft);
  }
}

TEST_CASE("consistency filter keeps agreements and drops the rest") {
  using Opt = std::optional<int>;
  const auto out = consistency_filter({1, 1, 0}, {1, 0, 0});
  REQUIRE(out.size() == 3);
  CHECK(out[0] == Opt{1});
  CHECK(out[1] == Opt{});
  CHECK(out[2] == Opt{0});

  const auto all = consistency_filter({1, 0, 1}, {1, 0, 1});
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].has_value());

  const auto none = consistency_filter({1, 1}, {0, 0});
  for (const auto& v : none) CHECK_FALSE(v.has_value());

  CHECK_THROWS_AS(consistency_filter({1}, {1, 0}), std::invalid_argument);
  CHECK(consistency_filter({}, {}).empty());
}

TEST_CASE("dual-completer filtering is sound and fully accounted") {
  const auto fix = sample_fixture(20, 2, 61, agent("pol", 0.8, 0.2, 0.1));
  const CompleterConfig weak = agent("weak", 0.35, 0.25, 0.03, 1);
  const CompleterConfig strong = agent("strong", 0.90, 0.25, 0.30, 2);
  LabelOptions opts;
  opts.rollouts_t = 4;
  const FilteredDataset fd =
      build_filtered_dataset(fix.problems, fix.solutions, weak, strong, opts, 62);

  // cost: exactly 2*T*K completions per solution, split evenly by completer
  std::int64_t total_steps = 0;
  for (const auto& s : fix.solutions) total_steps += static_cast<std::int64_t>(s.steps.size());
  CHECK(fd.ledger.completions_total == 2 * 4 * total_steps);
  CHECK(fd.ledger.by_completer.at("weak") == 4 * total_steps);
  CHECK(fd.ledger.by_completer.at("strong") == 4 * total_steps);

  // every step appears in both single-completer views
  CHECK(fd.weak_all.size() == static_cast<std::size_t>(total_steps));
  CHECK(fd.strong_all.size() == static_cast<std::size_t>(total_steps));

  // soundness: each kept record agrees with both views at its address
  std::map<std::pair<int, int>, int> weak_by_addr, strong_by_addr;
  for (const auto& r : fd.weak_all) weak_by_addr[{r.solution_index, r.step_index}] = r.label;
  for (const auto& r : fd.strong_all)
    strong_by_addr[{r.solution_index, r.step_index}] = r.label;
  CHECK(!fd.kept.empty());
  CHECK(fd.kept.size() < fd.weak_all.size());  // filtering actually drops steps
  for (const auto& r : fd.kept) {
    CHECK(weak_by_addr.at({r.solution_index, r.step_index}) == r.label);
    CHECK(strong_by_addr.at({r.solution_index, r.step_index}) == r.label);
    CHECK(r.source == "consistency-kept");
    CHECK(r.completer_names == std::vector<std::string>{"weak", "strong"});
  }
  for (const auto& r : fd.weak_all) {
    CHECK(r.source == "single-completer");
    CHECK(r.completer_names == std::vector<std::string>{"weak"});
  }

  // and conversely: agreeing addresses are exactly the kept ones under
  // retention_min = 1
  std::size_t agreements = 0;
  for (const auto& [addr, lbl] : weak_by_addr)
    if (strong_by_addr.at(addr) == lbl) ++agreements;
  // solutions below retention_min keep nothing; with min 1 only fully
  // disagreeing solutions drop out, so kept == agreements
  CHECK(fd.kept.size() == agreements);
}

TEST_CASE("filtered labeling is identical for any worker count") {
  const auto fix = sample_fixture(12, 2, 71, agent("pol", 0.8, 0.2, 0.1));
  const CompleterConfig weak = agent("weak", 0.35, 0.25, 0.03, 1);
  const CompleterConfig strong = agent("strong", 0.90, 0.25, 0.30, 2);
  LabelOptions opts;
  opts.rollouts_t = 4;
  const auto a = build_filtered_dataset(fix.problems, fix.solutions, weak, strong,
                                        opts, 72, 1);
  const auto b = build_filtered_dataset(fix.problems, fix.solutions, weak, strong,
                                        opts, 72, 8);
  CHECK(json(a.kept) == json(b.kept));
  CHECK(json(a.weak_all) == json(b.weak_all));
  CHECK(json(a.strong_all) == json(b.strong_all));
  CHECK(a.ledger.completions_total == b.ledger.completions_total);
}

TEST_CASE("retention threshold drops sparse solutions from the kept set") {
  const auto fix = sample_fixture(20, 2, 81, agent("pol", 0.8, 0.2, 0.1));
  const CompleterConfig weak = agent("weak", 0.35, 0.25, 0.03, 1);
  const CompleterConfig strong = agent("strong", 0.90, 0.25, 0.30, 2);
  LabelOptions all_required;
  all_required.rollouts_t = 4;
  all_required.retention_min = 1000;  // unreachable: every solution drops
  const auto fd = build_filtered_dataset(fix.problems, fix.solutions, weak, strong,
                                         all_required, 82);
  CHECK(fd.kept.empty());
  CHECK(!fd.weak_all.empty());   // single-completer views are unaffected
  CHECK(!fd.strong_all.empty());
  CHECK(fd.ledger.completions_total > 0);  // the rollouts were still paid for
}

TEST_CASE("single-completer labeling addresses every step once") {
  const auto fix = sample_fixture(10, 2, 91, agent("pol", 0.8, 0.2, 0.1));
  const CompleterConfig c = agent("c", 0.8, 0.2, 0.15);
  LabelOptions opts;
  opts.rollouts_t = 4;
  CostLedger ledger;
  const auto records = label_dataset(fix.problems, fix.solutions, c, opts, 92, &ledger);

  std::int64_t total_steps = 0;
  for (const auto& s : fix.solutions) total_steps += static_cast<std::int64_t>(s.steps.size());
  CHECK(records.size() == static_cast<std::size_t>(total_steps));
  CHECK(ledger.completions_total == 4 * total_steps);
  for (const auto& r : records) {
    CHECK(r.source == "single-completer");
    CHECK(r.completer_names == std::vector<std::string>{"c"});
    CHECK(fix.solutions[static_cast<std::size_t>(r.solution_index)].problem_id ==
          r.problem_id);
  }

  // worker independence
  const auto again = label_dataset(fix.problems, fix.solutions, c, opts, 92, nullptr, 4);
  CHECK(json(records) == json(again));
}

TEST_CASE("label accuracy scores records against simulator truth") {
  const auto fix = sample_fixture(5, 1, 101, agent("pol", 0.8, 0.2, 0.1));
  std::vector<LabeledStepRecord> records;
  for (std::size_t s = 0; s < fix.solutions.size(); ++s)
    for (std::size_t i = 0; i < fix.solutions[s].steps.size(); ++i) {
      LabeledStepRecord r;
      r.problem_id = fix.solutions[s].problem_id;
      r.solution_index = static_cast<int>(s);
      r.step_index = static_cast<int>(i);
      r.label =
          *fix.solutions[s].steps[i].truth_label == TruthLabel::correct ? 1 : 0;
      records.push_back(r);
    }
  CHECK(label_accuracy(records, fix.solutions) == 1.0);

  auto flipped = records;
  for (auto& r : flipped) r.label = 1 - r.label;
  CHECK(label_accuracy(flipped, fix.solutions) == 0.0);

  auto half = records;
  for (std::size_t i = 0; i < half.size(); i += 2) half[i].label = 1 - half[i].label;
  const double acc = label_accuracy(half, fix.solutions);
  CHECK(acc > 0.0);
  CHECK(acc < 1.0);

  CHECK_THROWS_WITH_AS(label_accuracy({}, fix.solutions), "no records",
                       std::invalid_argument);

  auto stripped = fix.solutions;
  stripped[0].steps[0].truth_label.reset();
  CHECK_THROWS_WITH_AS(label_accuracy(records, stripped), "ground truth unavailable",
                       std::runtime_error);

  auto out_of_range = records;
  out_of_range[0].step_index = 999;
  CHECK_THROWS_AS(label_accuracy(out_of_range, fix.solutions), std::invalid_argument);
}

TEST_CASE("records serialize losslessly") {
  LabeledStepRecord r;
  r.problem_id = "prob-xyz";
  r.solution_index = 3;
  r.step_index = 1;
  r.label = 1;
  r.soft = 0.625;
  r.source = "consistency-kept";
  r.completer_names = {"weak", "strong"};
  const nlohmann::json j = r;
  const auto r2 = j.get<LabeledStepRecord>();
  CHECK(json(r2) == j);

  CostLedger ledger;
  ledger.add("weak", 32);
  ledger.add("strong", 32);
  const nlohmann::json lj = ledger;
  CHECK(lj.at("completions_total") == 64);
  CHECK(lj.at("completions_by_completer").at("weak") == 32);
  const auto l2 = lj.get<CostLedger>();
  CHECK(l2.completions_total == 64);
  CHECK(l2.by_completer.at("strong") == 32);
}
