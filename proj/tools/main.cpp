#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prmkit/digest.hpp"
#include "prmkit/evalkit.hpp"
#include "prmkit/jsonl.hpp"
#include "prmkit/label.hpp"
#include "prmkit/parallel.hpp"
#include "prmkit/pipeline.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/validate.hpp"
#include "prmkit/verify.hpp"

namespace fs = std::filesystem;
using namespace prmkit;

namespace {

pipeline::PipelineConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    pipeline::PipelineConfig cfg;
    pipeline::validate(cfg);
    return cfg;
  }
  return pipeline::load_config(config_path);
}

std::vector<Problem> make_problems(int count, std::uint64_t pool_stream,
                                   const sim::SimulatorConfig& sim_cfg, int workers) {
  return parallel_map<Problem>(
      static_cast<std::size_t>(count), workers, [&](std::size_t i) {
        return sim::generate_problem(derive_rng_stream(pool_stream, i), sim_cfg);
      });
}

score::ScorerParams load_params(const std::string& path) {
  return pipeline::parse_json_file(path).get<score::ScorerParams>();
}

CompleterConfig load_completer(const std::string& path) {
  return pipeline::parse_json_file(path).get<CompleterConfig>();
}

// A label file for `eval judge` is JSONL where each line is either a bare
// 0/1 or an object carrying a "label" field.
std::vector<int> read_label_file(const std::string& path) {
  const auto lines = parse_jsonl(read_text_file(path), path);
  std::vector<int> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json& j = lines[i];
    try {
      out.push_back(j.is_object() ? j.at("label").get<int>() : j.get<int>());
    } catch (const json::exception& e) {
      throw std::invalid_argument(path + ": record " + std::to_string(i + 1) + ": " +
                                  e.what());
    }
  }
  return out;
}

std::string format3(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << v;
  return out.str();
}

void print_eval(const std::string& name, double mean, double stddev) {
  std::cout << "  " << std::left << std::setw(18) << name << std::right << " "
            << format3(mean) << " +/- " << format3(stddev) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reward-model data pipeline over a deterministic synthetic solver"};
  app.require_subcommand(1);

  std::string config_path, out_path, out_dir, problems_path, solutions_path,
      steps_path, params_path, orm_params_path, manifest_path, rules_path,
      weak_path, strong_path, ledger_path, out_weak_path, out_strong_path,
      prm_out_path, orm_out_path, stats_path, rejections_path, pred_path,
      truth_path, selector_name = "all", aggregation_name, mode = "both",
      phase_name;
  int count = 100, per_problem = 4, rollouts_t = 0, bon_n = 0, raft_m = 0,
      runs = 0, workers = 0, feature_dim = kDefaultFeatureDim, upsample = 0;
  std::uint64_t seed = 1;
  std::string answer_a, answer_b;

  // gen -------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a deterministic problem pool");
  gen->add_option("--count", count, "number of problems")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "pool stream seed");
  gen->add_option("--out", out_path, "output problems.jsonl")->required();
  gen->add_option("--config", config_path, "pipeline config json");
  gen->add_option("--workers", workers, "worker threads");
  gen->callback([&] {
    const auto cfg = load_or_default(config_path);
    const int w = workers > 0 ? workers : cfg.run.worker_count;
    const auto problems = make_problems(count, seed, cfg.simulator, w);
    write_jsonl(out_path, problems);
    std::cout << "wrote " << problems.size() << " problems to " << out_path << "\n";
  });

  // sample ------------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "sample policy solutions per problem");
  sample->add_option("--problems", problems_path, "problems.jsonl")->required();
  sample->add_option("--n-per-problem,--per-problem", per_problem,
                     "solutions per problem")
      ->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "sampling stream seed");
  sample->add_option("--out", out_path, "output solutions.jsonl")->required();
  sample->add_option("--config", config_path, "pipeline config json");
  sample->add_option("--workers", workers, "worker threads");
  sample->callback([&] {
    const auto cfg = load_or_default(config_path);
    const int w = workers > 0 ? workers : cfg.run.worker_count;
    const auto problems = read_jsonl<Problem>(problems_path);
    const auto solutions = parallel_map<Solution>(
        problems.size() * static_cast<std::size_t>(per_problem), w,
        [&](std::size_t idx) {
          return sim::policy_sample(
              problems[idx / static_cast<std::size_t>(per_problem)], cfg.simulator,
              cfg.policy, derive_rng_stream(seed, idx));
        });
    write_jsonl(out_path, solutions);
    std::cout << "wrote " << solutions.size() << " solutions to " << out_path << "\n";
  });

  // validate ------------------------------------------------------------------
  auto* vcheck = app.add_subcommand("validate", "structural dataset checks");
  vcheck->add_option("--problems", problems_path, "problems.jsonl")->required();
  vcheck->add_option("--solutions", solutions_path, "solutions.jsonl")->required();
  vcheck->add_option("--feature-dim", feature_dim, "expected feature dimension");
  vcheck->callback([&] {
    const auto problems = read_jsonl<Problem>(problems_path);
    const auto solutions = read_jsonl<Solution>(solutions_path);
    const auto report = validate_dataset(problems, solutions, feature_dim);
    std::cout << report.to_string();
    if (!report.ok()) throw std::invalid_argument("dataset has violations");
  });

  // label run -------------------------------------------------------------
  auto* label_cmd = app.add_subcommand("label", "Monte Carlo step labeling");
  auto* label_run = label_cmd->add_subcommand("run", "label a sampled dataset");
  label_run->add_option("--problems", problems_path, "problems.jsonl")->required();
  label_run->add_option("--solutions", solutions_path, "solutions.jsonl")->required();
  label_run->add_option("--weak", weak_path, "weak completer config json");
  label_run->add_option("--strong", strong_path, "strong completer config json");
  label_run->add_option("--t", rollouts_t, "completions per step");
  label_run->add_option("--seed", seed, "labeling stream seed");
  label_run->add_option("--out", out_path, "kept step records jsonl")->required();
  label_run->add_option("--ledger", ledger_path, "completion-cost ledger json");
  label_run->add_option("--out-weak", out_weak_path, "unfiltered weak records");
  label_run->add_option("--out-strong", out_strong_path, "unfiltered strong records");
  label_run->add_option("--mode", mode, "both | weak | strong")
      ->check(CLI::IsMember({"both", "weak", "strong"}));
  label_run->add_option("--workers", workers, "worker threads");
  label_run->add_option("--config", config_path, "pipeline config json");
  label_run->callback([&] {
    const auto cfg = load_or_default(config_path);
    const int w = workers > 0 ? workers : cfg.run.worker_count;
    label::LabelOptions opts = cfg.label_opts;
    opts.rollouts_t = rollouts_t > 0 ? rollouts_t : cfg.run.num_rollouts_t;
    const auto weak = weak_path.empty() ? cfg.weak_completer : load_completer(weak_path);
    const auto strong =
        strong_path.empty() ? cfg.strong_completer : load_completer(strong_path);
    const auto problems = read_jsonl<Problem>(problems_path);
    const auto solutions = read_jsonl<Solution>(solutions_path);
    label::CostLedger ledger;
    if (mode == "both") {
      const auto fd =
          label::build_filtered_dataset(problems, solutions, weak, strong, opts, seed, w);
      write_jsonl(out_path, fd.kept);
      if (!out_weak_path.empty()) write_jsonl(out_weak_path, fd.weak_all);
      if (!out_strong_path.empty()) write_jsonl(out_strong_path, fd.strong_all);
      ledger = fd.ledger;
      std::cout << "kept " << fd.kept.size() << " of " << fd.weak_all.size()
                << " step records\n";
      try {
        std::cout << "accuracy: weak "
                  << format3(label::label_accuracy(fd.weak_all, solutions)) << ", strong "
                  << format3(label::label_accuracy(fd.strong_all, solutions))
                  << ", filtered " << format3(label::label_accuracy(fd.kept, solutions))
                  << "\n";
      } catch (const std::runtime_error&) {
        // external data carries no simulator truth; skip the readout
      }
    } else {
      const auto& completer = mode == "weak" ? weak : strong;
      const auto records =
          label::label_dataset(problems, solutions, completer, opts, seed, &ledger, w);
      write_jsonl(out_path, records);
      std::cout << "wrote " << records.size() << " step records\n";
    }
    if (!ledger_path.empty())
      write_text_file(ledger_path, json(ledger).dump(2) + "\n");
    std::cout << "cost: " << ledger.completions_total << " completions\n";
  });

  // curate run ----------------------------------------------------------
  auto* curate_cmd = app.add_subcommand("curate", "filter, dedup, label, export");
  auto* curate_run = curate_cmd->add_subcommand("run", "curate a labeled dataset");
  curate_run->add_option("--problems", problems_path, "problems.jsonl")->required();
  curate_run->add_option("--in", solutions_path, "solutions.jsonl")->required();
  curate_run->add_option("--steps", steps_path, "labeled step records jsonl")->required();
  curate_run->add_option("--rules", rules_path, "filter rules json");
  curate_run->add_option("--out-prm", prm_out_path, "step-supervision export");
  curate_run->add_option("--out-orm", orm_out_path, "outcome-supervision export");
  curate_run->add_option("--stats", stats_path, "summary stats json");
  curate_run->add_option("--out", out_path, "curated solutions jsonl");
  curate_run->add_option("--out-steps", out_weak_path, "curated step records jsonl");
  curate_run->add_option("--rejections", rejections_path, "rejection report jsonl");
  curate_run->add_option("--upsample", upsample, "negative up-sampling rate");
  curate_run->add_option("--workers", workers, "worker threads");
  curate_run->add_option("--config", config_path, "pipeline config json");
  curate_run->callback([&] {
    const auto cfg = load_or_default(config_path);
    const int w = workers > 0 ? workers : cfg.run.worker_count;
    const int rate = upsample > 0 ? upsample : cfg.upsample_rate;
    curate::FilterRules rules = cfg.filter_rules;
    if (!rules_path.empty()) {
      rules = pipeline::parse_json_file(rules_path).get<curate::FilterRules>();
      curate::validate(rules);
    }
    const auto problems = read_jsonl<Problem>(problems_path);
    const auto solutions = read_jsonl<Solution>(solutions_path);
    const auto records = read_jsonl<label::LabeledStepRecord>(steps_path);
    const auto curated = curate::curate_dataset(problems, solutions, records, rules, w);
    if (!out_path.empty()) write_jsonl(out_path, curated.solutions);
    if (!out_weak_path.empty()) write_jsonl(out_weak_path, curated.steps);
    if (!rejections_path.empty()) write_jsonl(rejections_path, curated.rejections);
    if (!prm_out_path.empty())
      write_text_file(prm_out_path, curate::export_prm_training(
                                        curated.steps, problems, curated.solutions));
    if (!orm_out_path.empty())
      write_text_file(orm_out_path,
                      curate::export_orm_training(problems, curated.solutions));
    const auto before = curate::label_distribution(curated.steps);
    const auto after =
        curate::label_distribution(curate::upsample_negatives(curated.steps, rate));
    const json stats{
        {"input_solutions", solutions.size()},
        {"curated_solutions", curated.solutions.size()},
        {"curated_step_records", curated.steps.size()},
        {"rejections", curated.rejections.size()},
        {"upsample_rate", rate},
        {"distribution_before",
         json{{"good_count", before.good_count},
              {"bad_count", before.bad_count},
              {"good_fraction", before.good_fraction},
              {"bad_fraction", before.bad_fraction}}},
        {"distribution_after",
         json{{"good_count", after.good_count},
              {"bad_count", after.bad_count},
              {"good_fraction", after.good_fraction},
              {"bad_fraction", after.bad_fraction}}}};
    if (!stats_path.empty()) write_text_file(stats_path, stats.dump(2) + "\n");
    std::cout << "kept " << curated.solutions.size() << " of " << solutions.size()
              << " solutions, " << curated.steps.size() << " step records, "
              << curated.rejections.size() << " rejections\n";
  });

  // train ----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "fit the logistic step scorer");
  train_cmd->add_option("--in,--solutions", solutions_path, "curated solutions jsonl")
      ->required();
  train_cmd->add_option("--steps", steps_path, "curated step records jsonl")->required();
  train_cmd->add_option("--out", out_path, "output params.json")->required();
  train_cmd->add_option("--orm-out", orm_params_path, "also fit an outcome scorer");
  train_cmd->add_option("--phase", phase_name, "single | two")
      ->check(CLI::IsMember({"single", "two"}));
  train_cmd->add_option("--config", config_path, "pipeline config json");
  train_cmd->callback([&] {
    const auto cfg = load_or_default(config_path);
    const auto solutions = read_jsonl<Solution>(solutions_path);
    const auto records = read_jsonl<label::LabeledStepRecord>(steps_path);
    const auto upsampled = curate::upsample_negatives(records, cfg.upsample_rate);
    const auto step_examples = score::make_step_examples(upsampled, solutions);
    const bool two_phase =
        phase_name.empty() ? cfg.two_phase : phase_name == "two";
    score::TrainResult result;
    if (two_phase) {
      const auto outcome_examples = score::make_outcome_examples(solutions);
      result = score::train_two_phase(outcome_examples, step_examples, cfg.train);
    } else {
      result = score::train(step_examples, cfg.train);
    }
    write_text_file(out_path, json(result.params).dump(2) + "\n");
    std::cout << "trained on " << step_examples.size() << " step examples"
              << (two_phase ? " (outcome-initialized)" : "") << ", loss "
              << format3(result.loss_trace.front()) << " -> "
              << format3(result.loss_trace.back()) << "\n";
    if (!orm_params_path.empty()) {
      const auto outcome_examples = score::make_outcome_examples(solutions);
      const auto orm = score::train(outcome_examples, cfg.train);
      write_text_file(orm_params_path, json(orm.params).dump(2) + "\n");
      std::cout << "outcome scorer loss " << format3(orm.loss_trace.front()) << " -> "
                << format3(orm.loss_trace.back()) << "\n";
    }
  });

  // eval bon / eval judge ---------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "selector comparison and judge metrics");
  auto* eval_bon = eval_cmd->add_subcommand("bon", "best-of-n selector accuracy");
  eval_bon->add_option("--params", params_path, "step scorer params.json")->required();
  eval_bon->add_option("--orm-params", orm_params_path, "outcome scorer params");
  eval_bon->add_option("--count", count, "eval problems")->check(CLI::PositiveNumber);
  eval_bon->add_option("--seed", seed, "eval stream seed");
  eval_bon->add_option("--n", bon_n, "candidates per problem");
  eval_bon->add_option("--runs", runs, "independent runs");
  eval_bon->add_option("--selector", selector_name,
                       "all | zero-shot | self-consistency | orm | prm | pass-at-n");
  eval_bon->add_option("--agg,--aggregation", aggregation_name, "min | last | product");
  eval_bon->add_option("--report,--out", out_path, "write report json");
  eval_bon->add_option("--config", config_path, "pipeline config json");
  eval_bon->add_option("--workers", workers, "worker threads");
  eval_bon->callback([&] {
    const auto cfg = load_or_default(config_path);
    RunConfig rc = cfg.run;
    rc.master_seed = derive_rng_stream(seed, 2);
    if (bon_n > 0) rc.bon_n = bon_n;
    if (runs > 0) rc.num_eval_runs = runs;
    if (workers > 0) rc.worker_count = workers;
    const auto agg = aggregation_name.empty() ? cfg.aggregation
                                              : score::parse_aggregation(aggregation_name);
    const auto problems =
        make_problems(count, derive_rng_stream(seed, 1), cfg.simulator, rc.worker_count);
    const auto prm = load_params(params_path);
    const auto orm = orm_params_path.empty() ? prm : load_params(orm_params_path);
    // every run samples rc.bon_n candidates per problem from the policy
    const std::uint64_t sampled = static_cast<std::uint64_t>(rc.num_eval_runs) *
                                  problems.size() * static_cast<std::uint64_t>(rc.bon_n);
    label::CostLedger ledger;
    ledger.completions_total = sampled;
    ledger.by_completer[cfg.policy.name] = sampled;
    std::cout << "best-of-" << rc.bon_n << " accuracy over " << rc.num_eval_runs
              << " runs:\n";
    json bon;
    if (selector_name == "all") {
      bon = pipeline::selector_comparison(problems, cfg.simulator, cfg.policy, prm, orm,
                                          agg, rc);
      for (const auto& item : bon.items())
        print_eval(item.key(), item.value().at("mean").get<double>(),
                   item.value().at("stddev").get<double>());
    } else {
      evalkit::Selector sel{evalkit::parse_selector(selector_name), agg};
      evalkit::StepRewardFn fn;
      if (sel.kind == evalkit::SelectorKind::orm_rank)
        fn = evalkit::scorer_fn(orm);
      else if (sel.kind == evalkit::SelectorKind::prm_rank)
        fn = evalkit::scorer_fn(prm);
      const auto r = evalkit::evaluate(problems, cfg.simulator, cfg.policy, sel, fn, rc);
      print_eval(selector_name, r.mean, r.stddev);
      bon = json{{evalkit::to_string(sel.kind),
                  json{{"mean", r.mean}, {"stddev", r.stddev}, {"per_run", r.per_run}}}};
    }
    if (!out_path.empty())
      write_text_file(out_path, json{{"bon", bon},
                                     {"bon_n", rc.bon_n},
                                     {"num_eval_runs", rc.num_eval_runs},
                                     {"ledger", ledger}}
                                        .dump(2) +
                                    "\n");
  });

  auto* eval_judge = eval_cmd->add_subcommand("judge", "step-label F1 metrics");
  eval_judge->add_option("--pred", pred_path, "predicted labels jsonl");
  eval_judge->add_option("--truth", truth_path, "ground-truth labels jsonl");
  eval_judge->add_option("--params", params_path, "step scorer params.json");
  eval_judge->add_option("--problems", problems_path, "problems.jsonl");
  eval_judge->add_option("--solutions", solutions_path, "truth-labeled solutions");
  eval_judge->add_option("--report,--out", out_path, "write judge json");
  eval_judge->callback([&] {
    if (!pred_path.empty() || !truth_path.empty()) {
      if (pred_path.empty() || truth_path.empty())
        throw std::invalid_argument("--pred and --truth must be given together");
      const auto pred = read_label_file(pred_path);
      const auto truth = read_label_file(truth_path);
      const double f1 = evalkit::judge_f1(pred, truth);
      std::cout << "F1 " << format3(f1) << " over " << pred.size() << " labels\n";
      if (!out_path.empty())
        write_text_file(out_path,
                        json{{"f1", f1}, {"labels", pred.size()}}.dump(2) + "\n");
      return;
    }
    if (params_path.empty() || problems_path.empty() || solutions_path.empty())
      throw std::invalid_argument(
          "need either --pred/--truth or --params/--problems/--solutions");
    const auto problems = read_jsonl<Problem>(problems_path);
    const auto solutions = read_jsonl<Solution>(solutions_path);
    const json jj = pipeline::judge_report(problems, solutions, load_params(params_path));
    std::cout << "judge: macro-F1 " << format3(jj.at("macro_f1").get<double>())
              << ", micro-F1 " << format3(jj.at("micro_f1").get<double>()) << " over "
              << jj.at("steps").get<std::size_t>() << " steps\n";
    for (const auto& item : jj.at("per_subset").items())
      std::cout << "  " << item.key() << " " << format3(item.value().get<double>())
                << "\n";
    if (!out_path.empty()) write_text_file(out_path, jj.dump(2) + "\n");
  });

  // raft select ---------------------------------------------------------------
  auto* raft_cmd = app.add_subcommand("raft", "reward-ranked fine-tuning selection");
  auto* raft_sel = raft_cmd->add_subcommand("select", "select high-reward solutions");
  raft_sel->add_option("--params", params_path, "step scorer params.json")->required();
  raft_sel->add_option("--count", count, "problems")->check(CLI::PositiveNumber);
  raft_sel->add_option("--seed", seed, "stream seed");
  raft_sel->add_option("--m", raft_m, "candidates per problem");
  raft_sel->add_option("--out", out_path, "output sft.jsonl")->required();
  raft_sel->add_option("--agg,--aggregation", aggregation_name, "min | last | product");
  raft_sel->add_option("--config", config_path, "pipeline config json");
  raft_sel->add_option("--workers", workers, "worker threads");
  raft_sel->callback([&] {
    const auto cfg = load_or_default(config_path);
    RunConfig rc = cfg.run;
    if (raft_m > 0) rc.raft_m = raft_m;
    if (workers > 0) rc.worker_count = workers;
    const auto agg = aggregation_name.empty() ? cfg.aggregation
                                              : score::parse_aggregation(aggregation_name);
    const auto problems =
        make_problems(count, derive_rng_stream(seed, 1), cfg.simulator, rc.worker_count);
    const auto out = pipeline::raft_selection(problems, cfg.simulator, cfg.policy,
                                              load_params(params_path), agg,
                                              cfg.filter_rules, rc,
                                              derive_rng_stream(seed, 2));
    write_text_file(out_path, out.sft_jsonl);
    std::cout << "kept " << out.summary.at("kept") << " of "
              << out.summary.at("problems") << " problems\n";
  });

  // pipeline / report -----------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "run every stage into a directory");
  pipe->add_option("--config", config_path, "pipeline config json");
  pipe->add_option("--out-dir", out_dir, "output directory")->required();
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  pipe->add_option("--seed", seed_override, "override master seed")
      ->each([&](const std::string&) { seed_given = true; });
  pipe->add_option("--workers", workers, "override worker count");
  pipe->callback([&] {
    auto cfg = load_or_default(config_path);
    if (seed_given) cfg.run.master_seed = seed_override;
    if (workers > 0) cfg.run.worker_count = workers;
    pipeline::run_pipeline(cfg, out_dir);
    std::cout << pipeline::report(fs::path(out_dir) / "manifest.json");
  });

  auto* rep = app.add_subcommand("report", "summarize a run manifest");
  rep->add_option("--manifest", manifest_path, "manifest.json")->required();
  rep->callback([&] { std::cout << pipeline::report(manifest_path); });

  // verify check ------------------------------------------------------------------
  auto* verify_cmd = app.add_subcommand("verify", "answer equivalence utilities");
  auto* verify_check = verify_cmd->add_subcommand("check", "compare two answers");
  verify_check->add_option("a", answer_a, "first answer")->required();
  verify_check->add_option("b", answer_b, "second answer")->required();
  verify_check->callback([&] {
    const auto ca = verify::canonicalize(answer_a);
    const auto cb = verify::canonicalize(answer_b);
    std::cout << "a: " << verify::to_string(ca) << "\n"
              << "b: " << verify::to_string(cb) << "\n"
              << (verify::equal(ca, cb) ? "equal" : "different") << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
