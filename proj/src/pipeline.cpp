#include "prmkit/pipeline.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "prmkit/digest.hpp"
#include "prmkit/jsonl.hpp"
#include "prmkit/parallel.hpp"
#include "prmkit/rng.hpp"
#include "prmkit/validate.hpp"

namespace prmkit::pipeline {
namespace fs = std::filesystem;

namespace {

// stage stream tags under the master seed
constexpr std::uint64_t kGenPool = 1;
constexpr std::uint64_t kEvalPool = 2;
constexpr std::uint64_t kJudgePool = 3;
constexpr std::uint64_t kRaftPool = 4;
constexpr std::uint64_t kSampleStage = 5;
constexpr std::uint64_t kLabelStage = 6;
constexpr std::uint64_t kTrainStage = 7;
constexpr std::uint64_t kEvalStage = 8;
constexpr std::uint64_t kJudgeSample = 9;
constexpr std::uint64_t kRaftSample = 10;

// --- strict config parsing ---------------------------------------------------

std::string join_path(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object())
    throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(join_path(path, item.key().c_str()) + ": unknown key");
  }
}

template <typename T>
void get_field(const json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(join_path(path, key) + ": " + e.what());
  }
}

void read_completer(const json& obj, const std::string& path, CompleterConfig& out) {
  require_object(obj, path);
  check_keys(obj, path,
             {"name", "p_solve_base", "difficulty_slope", "p_recover", "seed_offset"});
  get_field(obj, "name", out.name, path);
  get_field(obj, "p_solve_base", out.p_solve_base, path);
  get_field(obj, "difficulty_slope", out.difficulty_slope, path);
  get_field(obj, "p_recover", out.p_recover, path);
  get_field(obj, "seed_offset", out.seed_offset, path);
}

json completer_to_json(const CompleterConfig& c) {
  return json{{"name", c.name},
              {"p_solve_base", c.p_solve_base},
              {"difficulty_slope", c.difficulty_slope},
              {"p_recover", c.p_recover},
              {"seed_offset", c.seed_offset}};
}

// --- run state ---------------------------------------------------------------

struct ArtifactEntry {
  std::string path;  // relative to out_dir
  std::uint64_t bytes = 0;
  std::string fnv1a64;
};

struct StageRecord {
  std::string name;
  std::vector<ArtifactEntry> artifacts;
  json summary = json::object();
};

class RunWriter {
 public:
  explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {}

  void write(StageRecord& stage, const std::string& rel, const std::string& bytes) {
    const fs::path full = dir_ / rel;
    write_text_file(full, bytes);
    created_.push_back(full);
    stage.artifacts.push_back({rel, bytes.size(), digest_hex(bytes)});
  }

  void remove_created() {
    std::error_code ec;
    for (const fs::path& p : created_) fs::remove(p, ec);
  }

 private:
  fs::path dir_;
  std::vector<fs::path> created_;
};

json stage_to_json(const StageRecord& s) {
  json arts = json::array();
  for (const auto& a : s.artifacts)
    arts.push_back(json{{"path", a.path}, {"bytes", a.bytes}, {"fnv1a64", a.fnv1a64}});
  return json{{"name", s.name}, {"artifacts", arts}, {"summary", s.summary}};
}

std::vector<Problem> make_pool(int count, std::uint64_t pool_stream,
                               const sim::SimulatorConfig& sim_cfg, int workers) {
  return parallel_map<Problem>(
      static_cast<std::size_t>(count), workers, [&](std::size_t i) {
        return sim::generate_problem(derive_rng_stream(pool_stream, i), sim_cfg);
      });
}

json distribution_to_json(const curate::LabelDistribution& d) {
  return json{{"good_count", d.good_count},
              {"bad_count", d.bad_count},
              {"good_fraction", d.good_fraction},
              {"bad_fraction", d.bad_fraction}};
}

json eval_result_to_json(const evalkit::EvalResult& r) {
  return json{{"mean", r.mean}, {"stddev", r.stddev}, {"per_run", r.per_run}};
}

std::string format3(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << v;
  return out.str();
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  prmkit::validate(cfg.run);
  sim::validate(cfg.simulator);
  prmkit::validate(cfg.policy);
  prmkit::validate(cfg.weak_completer);
  prmkit::validate(cfg.strong_completer);
  curate::validate(cfg.filter_rules);
  score::validate(cfg.train);
  if (cfg.policy.name.empty() || cfg.weak_completer.name.empty() ||
      cfg.strong_completer.name.empty())
    throw ConfigError("agent names must be non-empty");
  if (cfg.weak_completer.name == cfg.strong_completer.name)
    throw ConfigError("completer names must differ");
  if (cfg.label_opts.retention_min < 0)
    throw ConfigError("label.retention_min: must be >= 0");
  if (cfg.upsample_rate < 1) throw ConfigError("train.upsample_rate: must be >= 1");
  if (cfg.counts.num_problems < 1)
    throw ConfigError("counts.num_problems: must be >= 1");
  if (cfg.counts.solutions_per_problem < 1)
    throw ConfigError("counts.solutions_per_problem: must be >= 1");
  if (cfg.counts.num_eval_problems < 0 || cfg.counts.num_judge_problems < 0 ||
      cfg.counts.num_raft_problems < 0)
    throw ConfigError("counts: pool sizes must be >= 0");
}

PipelineConfig config_from_json(const json& j) {
  require_object(j, "");
  check_keys(j, "",
             {"master_seed", "worker_count", "rollouts_t", "bon_n", "raft_m",
              "num_eval_runs", "simulator", "policy", "weak_completer",
              "strong_completer", "filter", "label", "train", "eval", "counts"});
  PipelineConfig cfg;
  get_field(j, "master_seed", cfg.run.master_seed, "");
  get_field(j, "worker_count", cfg.run.worker_count, "");
  get_field(j, "rollouts_t", cfg.run.num_rollouts_t, "");
  get_field(j, "bon_n", cfg.run.bon_n, "");
  get_field(j, "raft_m", cfg.run.raft_m, "");
  get_field(j, "num_eval_runs", cfg.run.num_eval_runs, "");

  if (j.contains("simulator")) {
    const json& s = j.at("simulator");
    require_object(s, "simulator");
    check_keys(s, "simulator",
               {"feature_dim", "feature_noise", "step_error_rate",
                "plan_length_range", "difficulty_range"});
    get_field(s, "feature_dim", cfg.simulator.feature_dim, "simulator");
    get_field(s, "feature_noise", cfg.simulator.feature_noise, "simulator");
    get_field(s, "step_error_rate", cfg.simulator.step_error_rate, "simulator");
    get_field(s, "plan_length_range", cfg.simulator.plan_length_range, "simulator");
    get_field(s, "difficulty_range", cfg.simulator.difficulty_range, "simulator");
  }
  if (j.contains("policy")) read_completer(j.at("policy"), "policy", cfg.policy);
  if (j.contains("weak_completer"))
    read_completer(j.at("weak_completer"), "weak_completer", cfg.weak_completer);
  if (j.contains("strong_completer"))
    read_completer(j.at("strong_completer"), "strong_completer", cfg.strong_completer);

  if (j.contains("filter")) {
    const json& f = j.at("filter");
    require_object(f, "filter");
    check_keys(f, "filter",
               {"min_tokens", "max_tokens", "repetition_ngram",
                "repetition_max_count", "dedup_ngram", "dedup_jaccard"});
    get_field(f, "min_tokens", cfg.filter_rules.min_tokens, "filter");
    get_field(f, "max_tokens", cfg.filter_rules.max_tokens, "filter");
    get_field(f, "repetition_ngram", cfg.filter_rules.repetition_ngram, "filter");
    get_field(f, "repetition_max_count", cfg.filter_rules.repetition_max_count,
              "filter");
    get_field(f, "dedup_ngram", cfg.filter_rules.dedup_ngram, "filter");
    get_field(f, "dedup_jaccard", cfg.filter_rules.dedup_jaccard, "filter");
  }
  if (j.contains("label")) {
    const json& l = j.at("label");
    require_object(l, "label");
    check_keys(l, "label", {"retention_min", "truncate_after_first_zero"});
    get_field(l, "retention_min", cfg.label_opts.retention_min, "label");
    get_field(l, "truncate_after_first_zero", cfg.label_opts.truncate_after_first_zero,
              "label");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    require_object(t, "train");
    check_keys(t, "train",
               {"learning_rate", "epochs", "batch_size", "seed", "upsample_rate",
                "two_phase"});
    get_field(t, "learning_rate", cfg.train.learning_rate, "train");
    get_field(t, "epochs", cfg.train.epochs, "train");
    get_field(t, "batch_size", cfg.train.batch_size, "train");
    get_field(t, "seed", cfg.train.seed, "train");
    get_field(t, "upsample_rate", cfg.upsample_rate, "train");
    get_field(t, "two_phase", cfg.two_phase, "train");
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    require_object(e, "eval");
    check_keys(e, "eval", {"aggregation"});
    if (e.contains("aggregation")) {
      std::string name;
      get_field(e, "aggregation", name, "eval");
      try {
        cfg.aggregation = score::parse_aggregation(name);
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("eval.aggregation: ") + ex.what());
      }
    }
  }
  if (j.contains("counts")) {
    const json& c = j.at("counts");
    require_object(c, "counts");
    check_keys(c, "counts",
               {"num_problems", "solutions_per_problem", "num_eval_problems",
                "num_judge_problems", "num_raft_problems"});
    get_field(c, "num_problems", cfg.counts.num_problems, "counts");
    get_field(c, "solutions_per_problem", cfg.counts.solutions_per_problem, "counts");
    get_field(c, "num_eval_problems", cfg.counts.num_eval_problems, "counts");
    get_field(c, "num_judge_problems", cfg.counts.num_judge_problems, "counts");
    get_field(c, "num_raft_problems", cfg.counts.num_raft_problems, "counts");
  }
  validate(cfg);
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  return json{
      {"master_seed", cfg.run.master_seed},
      {"worker_count", cfg.run.worker_count},
      {"rollouts_t", cfg.run.num_rollouts_t},
      {"bon_n", cfg.run.bon_n},
      {"raft_m", cfg.run.raft_m},
      {"num_eval_runs", cfg.run.num_eval_runs},
      {"simulator",
       json{{"feature_dim", cfg.simulator.feature_dim},
            {"feature_noise", cfg.simulator.feature_noise},
            {"step_error_rate", cfg.simulator.step_error_rate},
            {"plan_length_range", cfg.simulator.plan_length_range},
            {"difficulty_range", cfg.simulator.difficulty_range}}},
      {"policy", completer_to_json(cfg.policy)},
      {"weak_completer", completer_to_json(cfg.weak_completer)},
      {"strong_completer", completer_to_json(cfg.strong_completer)},
      {"filter",
       json{{"min_tokens", cfg.filter_rules.min_tokens},
            {"max_tokens", cfg.filter_rules.max_tokens},
            {"repetition_ngram", cfg.filter_rules.repetition_ngram},
            {"repetition_max_count", cfg.filter_rules.repetition_max_count},
            {"dedup_ngram", cfg.filter_rules.dedup_ngram},
            {"dedup_jaccard", cfg.filter_rules.dedup_jaccard}}},
      {"label",
       json{{"retention_min", cfg.label_opts.retention_min},
            {"truncate_after_first_zero", cfg.label_opts.truncate_after_first_zero}}},
      {"train",
       json{{"learning_rate", cfg.train.learning_rate},
            {"epochs", cfg.train.epochs},
            {"batch_size", cfg.train.batch_size},
            {"seed", cfg.train.seed},
            {"upsample_rate", cfg.upsample_rate},
            {"two_phase", cfg.two_phase}}},
      {"eval", json{{"aggregation", score::to_string(cfg.aggregation)}}},
      {"counts",
       json{{"num_problems", cfg.counts.num_problems},
            {"solutions_per_problem", cfg.counts.solutions_per_problem},
            {"num_eval_problems", cfg.counts.num_eval_problems},
            {"num_judge_problems", cfg.counts.num_judge_problems},
            {"num_raft_problems", cfg.counts.num_raft_problems}}}};
}

json parse_json_file(const fs::path& path) {
  const std::string bytes = read_text_file(path);
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line number
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < bytes.size(); ++i)
      if (bytes[i] == '\n') ++line;
    throw std::runtime_error(path.string() + ": line " + std::to_string(line) + ": " +
                             e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  return config_from_json(parse_json_file(path));
}

json selector_comparison(const std::vector<Problem>& problems,
                         const sim::SimulatorConfig& sim_cfg,
                         const CompleterConfig& policy,
                         const score::ScorerParams& prm_params,
                         const score::ScorerParams& orm_params,
                         score::Aggregation aggregation, const RunConfig& run_cfg) {
  const auto prm_fn = evalkit::scorer_fn(prm_params);
  const auto orm_fn = evalkit::scorer_fn(orm_params);
  struct Entry {
    const char* name;
    evalkit::Selector selector;
    const evalkit::StepRewardFn* fn;
  };
  const evalkit::StepRewardFn none;
  const Entry entries[] = {
      {"zero-shot", {evalkit::SelectorKind::zero_shot, aggregation}, &none},
      {"self-consistency", {evalkit::SelectorKind::self_consistency, aggregation},
       &none},
      {"orm-rank", {evalkit::SelectorKind::orm_rank, aggregation}, &orm_fn},
      {"prm-rank", {evalkit::SelectorKind::prm_rank, aggregation}, &prm_fn},
      {"pass-at-n", {evalkit::SelectorKind::pass_at_n, aggregation}, &none},
  };
  json bon = json::object();
  for (const Entry& e : entries)
    bon[e.name] = eval_result_to_json(
        evalkit::evaluate(problems, sim_cfg, policy, e.selector, *e.fn, run_cfg));
  return bon;
}

json judge_report(const std::vector<Problem>& problems,
                  const std::vector<Solution>& solutions,
                  const score::ScorerParams& prm_params) {
  std::unordered_map<std::string, const Problem*> by_id;
  for (const Problem& p : problems) by_id[p.id] = &p;
  // two difficulty subsets; F1 over the pooled steps within each
  std::vector<int> pred_easy, truth_easy, pred_hard, truth_hard;
  for (const Solution& sol : solutions) {
    const auto it = by_id.find(sol.problem_id);
    if (it == by_id.end())
      throw std::runtime_error("unknown problem_id " + sol.problem_id);
    const bool hard = it->second->difficulty >= 0.5;
    auto& pred = hard ? pred_hard : pred_easy;
    auto& truth = hard ? truth_hard : truth_easy;
    const auto bits = evalkit::predict_step_labels(prm_params, sol);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (!sol.steps[i].truth_label)
        throw std::runtime_error("ground truth unavailable");
      pred.push_back(bits[i]);
      truth.push_back(*sol.steps[i].truth_label == TruthLabel::correct ? 1 : 0);
    }
  }
  std::vector<double> per_subset;
  std::vector<evalkit::F1Counts> counts;
  json subsets = json::object();
  if (!pred_easy.empty()) {
    per_subset.push_back(evalkit::judge_f1(pred_easy, truth_easy));
    counts.push_back(evalkit::f1_counts(pred_easy, truth_easy));
    subsets["easy"] = per_subset.back();
  }
  if (!pred_hard.empty()) {
    per_subset.push_back(evalkit::judge_f1(pred_hard, truth_hard));
    counts.push_back(evalkit::f1_counts(pred_hard, truth_hard));
    subsets["hard"] = per_subset.back();
  }
  if (per_subset.empty()) throw std::invalid_argument("no judge examples");
  return json{{"per_subset", subsets},
              {"macro_f1", evalkit::macro_f1(per_subset)},
              {"micro_f1", evalkit::micro_f1(counts)},
              {"steps", pred_easy.size() + pred_hard.size()}};
}

RaftOutput raft_selection(const std::vector<Problem>& problems,
                          const sim::SimulatorConfig& sim_cfg,
                          const CompleterConfig& policy,
                          const score::ScorerParams& prm_params,
                          score::Aggregation aggregation,
                          const curate::FilterRules& filter_rules,
                          const RunConfig& run_cfg, std::uint64_t sample_stream) {
  const auto prm_fn = evalkit::scorer_fn(prm_params);
  const int m = run_cfg.raft_m;
  const auto picks = parallel_map<std::optional<Solution>>(
      problems.size(), run_cfg.worker_count, [&](std::size_t p) {
        std::vector<Solution> candidates;
        candidates.reserve(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k)
          candidates.push_back(sim::policy_sample(
              problems[p], sim_cfg, policy,
              derive_rng_stream(sample_stream, p * static_cast<std::size_t>(m) +
                                                   static_cast<std::size_t>(k))));
        return evalkit::raft_select(problems[p], candidates, prm_fn, aggregation,
                                    filter_rules);
      });
  RaftOutput out;
  std::ostringstream sft;
  std::size_t kept = 0;
  for (std::size_t p = 0; p < picks.size(); ++p) {
    if (!picks[p]) continue;
    ++kept;
    const Solution& sol = *picks[p];
    const auto rewards = score::score_solution(prm_params, sol);
    sft << json{{"final_answer", sol.final_answer},
                {"problem_id", sol.problem_id},
                {"prompt", problems[p].prompt},
                {"reward", score::aggregate(rewards, aggregation)},
                {"text", curate::solution_text(sol)}}
               .dump()
        << '\n';
  }
  out.sft_jsonl = sft.str();
  out.summary = json{{"problems", problems.size()},
                     {"kept", kept},
                     {"skipped", problems.size() - kept}};
  return out;
}

void run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  fs::create_directories(out_dir);
  RunWriter writer(out_dir);
  std::vector<StageRecord> stages;
  const std::uint64_t master = cfg.run.master_seed;
  const int workers = cfg.run.worker_count;

  try {
    // --- gen -------------------------------------------------------------
    StageRecord gen;
    gen.name = "gen";
    const auto problems =
        make_pool(cfg.counts.num_problems, derive_rng_stream(master, kGenPool),
                  cfg.simulator, workers);
    writer.write(gen, "problems.jsonl", to_jsonl_string(problems));
    gen.summary = json{{"num_problems", cfg.counts.num_problems},
                       {"num_eval_problems", cfg.counts.num_eval_problems},
                       {"num_judge_problems", cfg.counts.num_judge_problems},
                       {"num_raft_problems", cfg.counts.num_raft_problems}};
    stages.push_back(std::move(gen));

    // --- sample ----------------------------------------------------------
    StageRecord sample;
    sample.name = "sample";
    const std::uint64_t sample_stream = derive_rng_stream(master, kSampleStage);
    const int per = cfg.counts.solutions_per_problem;
    const auto solutions = parallel_map<Solution>(
        problems.size() * static_cast<std::size_t>(per), workers,
        [&](std::size_t idx) {
          return sim::policy_sample(problems[idx / static_cast<std::size_t>(per)],
                                    cfg.simulator, cfg.policy,
                                    derive_rng_stream(sample_stream, idx));
        });
    const auto check = validate_dataset(problems, solutions, cfg.simulator.feature_dim);
    if (!check.ok())
      throw std::runtime_error("sampled dataset failed validation:\n" +
                               check.to_string());
    std::int64_t positives = 0;
    for (const auto& s : solutions) positives += s.outcome_label.value_or(0);
    writer.write(sample, "solutions.jsonl", to_jsonl_string(solutions));
    sample.summary =
        json{{"num_solutions", solutions.size()},
             {"positive_fraction",
              static_cast<double>(positives) / static_cast<double>(solutions.size())}};
    stages.push_back(std::move(sample));

    // --- label -----------------------------------------------------------
    StageRecord label_stage;
    label_stage.name = "label";
    label::LabelOptions opts = cfg.label_opts;
    opts.rollouts_t = cfg.run.num_rollouts_t;
    const auto fd = label::build_filtered_dataset(
        problems, solutions, cfg.weak_completer, cfg.strong_completer, opts,
        derive_rng_stream(master, kLabelStage), workers);
    writer.write(label_stage, "steps.jsonl", to_jsonl_string(fd.kept));
    writer.write(label_stage, "ledger.json", json(fd.ledger).dump(2) + "\n");
    label_stage.summary =
        json{{"kept_records", fd.kept.size()},
             {"weak_records", fd.weak_all.size()},
             {"strong_records", fd.strong_all.size()},
             {"agreement_fraction",
              fd.weak_all.empty() ? 0.0
                                  : static_cast<double>(fd.kept.size()) /
                                        static_cast<double>(fd.weak_all.size())}};
    if (!fd.kept.empty()) {
      label_stage.summary["accuracy_filtered"] = label::label_accuracy(fd.kept, solutions);
      label_stage.summary["accuracy_weak"] = label::label_accuracy(fd.weak_all, solutions);
      label_stage.summary["accuracy_strong"] =
          label::label_accuracy(fd.strong_all, solutions);
    }
    stages.push_back(std::move(label_stage));

    // --- curate ----------------------------------------------------------
    StageRecord curate_stage;
    curate_stage.name = "curate";
    const auto curated =
        curate::curate_dataset(problems, solutions, fd.kept, cfg.filter_rules, workers);
    const auto dist_before = curate::label_distribution(curated.steps);
    const auto upsampled = curate::upsample_negatives(curated.steps, cfg.upsample_rate);
    const auto dist_after = curate::label_distribution(upsampled);

    writer.write(curate_stage, "curated_solutions.jsonl",
                 to_jsonl_string(curated.solutions));
    writer.write(curate_stage, "curated_steps.jsonl", to_jsonl_string(curated.steps));
    writer.write(curate_stage, "rejections.jsonl", to_jsonl_string(curated.rejections));
    writer.write(curate_stage, "prm.txt",
                 curate::export_prm_training(curated.steps, problems, curated.solutions));
    writer.write(curate_stage, "orm.txt",
                 curate::export_orm_training(problems, curated.solutions));
    json rejections_by_rule = json::object();
    for (const auto& r : curated.rejections) {
      const auto it = rejections_by_rule.find(r.rule);
      rejections_by_rule[r.rule] = (it == rejections_by_rule.end() ? 0 : it->get<int>()) + 1;
    }
    curate_stage.summary = json{{"input_solutions", solutions.size()},
                                {"curated_solutions", curated.solutions.size()},
                                {"curated_step_records", curated.steps.size()},
                                {"rejections", rejections_by_rule},
                                {"upsample_rate", cfg.upsample_rate},
                                {"distribution_before", distribution_to_json(dist_before)},
                                {"distribution_after", distribution_to_json(dist_after)}};
    writer.write(curate_stage, "stats.json", curate_stage.summary.dump(2) + "\n");
    stages.push_back(std::move(curate_stage));

    // --- train -----------------------------------------------------------
    StageRecord train_stage;
    train_stage.name = "train";
    const auto step_examples = score::make_step_examples(upsampled, curated.solutions);
    const auto outcome_examples = score::make_outcome_examples(curated.solutions);
    score::TrainConfig tc = cfg.train;
    tc.seed = derive_rng_stream(derive_rng_stream(master, kTrainStage), cfg.train.seed);
    const auto prm_result = cfg.two_phase
                                ? score::train_two_phase(outcome_examples, step_examples, tc)
                                : score::train(step_examples, tc);
    score::TrainConfig oc = tc;
    oc.seed = derive_rng_stream(tc.seed, 1);
    const auto orm_result = score::train(outcome_examples, oc);
    writer.write(train_stage, "params.json", json(prm_result.params).dump(2) + "\n");
    writer.write(train_stage, "orm_params.json", json(orm_result.params).dump(2) + "\n");
    train_stage.summary =
        json{{"step_examples", step_examples.size()},
             {"outcome_examples", outcome_examples.size()},
             {"two_phase", cfg.two_phase},
             {"prm_loss_trace", prm_result.loss_trace},
             {"orm_loss_trace", orm_result.loss_trace}};
    stages.push_back(std::move(train_stage));

    // --- eval ------------------------------------------------------------
    StageRecord eval_stage;
    eval_stage.name = "eval";
    json report_json = json::object();
    if (cfg.counts.num_eval_problems > 0) {
      const auto eval_problems =
          make_pool(cfg.counts.num_eval_problems, derive_rng_stream(master, kEvalPool),
                    cfg.simulator, workers);
      RunConfig ecfg = cfg.run;
      ecfg.master_seed = derive_rng_stream(master, kEvalStage);
      report_json["bon"] =
          selector_comparison(eval_problems, cfg.simulator, cfg.policy,
                              prm_result.params, orm_result.params, cfg.aggregation,
                              ecfg);
      report_json["bon_n"] = cfg.run.bon_n;
      report_json["num_eval_runs"] = cfg.run.num_eval_runs;
    }
    if (cfg.counts.num_judge_problems > 0) {
      const auto judge_problems =
          make_pool(cfg.counts.num_judge_problems,
                    derive_rng_stream(master, kJudgePool), cfg.simulator, workers);
      const std::uint64_t judge_stream = derive_rng_stream(master, kJudgeSample);
      const auto judged = parallel_map<Solution>(
          judge_problems.size(), workers, [&](std::size_t p) {
            return sim::policy_sample(judge_problems[p], cfg.simulator, cfg.policy,
                                      derive_rng_stream(judge_stream, p));
          });
      report_json["judge"] = judge_report(judge_problems, judged, prm_result.params);
    }
    writer.write(eval_stage, "report.json", report_json.dump(2) + "\n");
    eval_stage.summary = report_json;
    stages.push_back(std::move(eval_stage));

    // --- raft ------------------------------------------------------------
    StageRecord raft_stage;
    raft_stage.name = "raft";
    if (cfg.counts.num_raft_problems > 0) {
      const auto raft_problems =
          make_pool(cfg.counts.num_raft_problems, derive_rng_stream(master, kRaftPool),
                    cfg.simulator, workers);
      auto raft_out = raft_selection(raft_problems, cfg.simulator, cfg.policy,
                                     prm_result.params, cfg.aggregation,
                                     cfg.filter_rules, cfg.run,
                                     derive_rng_stream(master, kRaftSample));
      writer.write(raft_stage, "sft.jsonl", raft_out.sft_jsonl);
      raft_stage.summary = std::move(raft_out.summary);
    } else {
      raft_stage.summary = json{{"problems", 0}, {"kept", 0}, {"skipped", 0}};
    }
    stages.push_back(std::move(raft_stage));

    // --- manifest (last, so its presence marks a complete run) ------------
    json stage_array = json::array();
    for (const auto& s : stages) stage_array.push_back(stage_to_json(s));
    const json config_json = config_to_json(cfg);
    const json manifest = json{{"format_version", 1},
                               {"master_seed", master},
                               {"config", config_json},
                               {"config_digest", digest_hex(config_json.dump())},
                               {"stages", stage_array},
                               {"ledger", fd.ledger}};
    StageRecord manifest_stage;
    manifest_stage.name = "manifest";
    writer.write(manifest_stage, "manifest.json", manifest.dump(2) + "\n");
  } catch (...) {
    writer.remove_created();
    throw;
  }
}

namespace {

const json* find_stage(const json& manifest, const std::string& name) {
  if (!manifest.contains("stages")) return nullptr;
  for (const json& s : manifest.at("stages"))
    if (s.value("name", "") == name) return &s;
  return nullptr;
}

}  // namespace

std::string report(const fs::path& manifest_path) {
  const json manifest = parse_json_file(manifest_path);
  if (!manifest.contains("master_seed") || !manifest.contains("stages"))
    throw std::runtime_error(manifest_path.string() +
                             ": not a run manifest (missing master_seed/stages)");
  std::ostringstream out;
  out << "pipeline run, master seed " << manifest.at("master_seed") << "\n";
  if (manifest.contains("config_digest"))
    out << "config digest " << manifest.at("config_digest").get<std::string>() << "\n";

  if (const json* gen = find_stage(manifest, "gen")) {
    const json& s = gen->at("summary");
    out << "gen: " << s.value("num_problems", 0) << " problems (eval "
        << s.value("num_eval_problems", 0) << ", judge "
        << s.value("num_judge_problems", 0) << ", raft "
        << s.value("num_raft_problems", 0) << ")\n";
  } else {
    out << "gen: not run\n";
  }
  if (const json* sample = find_stage(manifest, "sample")) {
    const json& s = sample->at("summary");
    out << "sample: " << s.value("num_solutions", 0) << " solutions, "
        << format3(s.value("positive_fraction", 0.0)) << " solve rate\n";
  } else {
    out << "sample: not run\n";
  }
  if (const json* lab = find_stage(manifest, "label")) {
    const json& s = lab->at("summary");
    out << "label: kept " << s.value("kept_records", 0) << " of "
        << s.value("weak_records", 0) << " step records (agreement "
        << format3(s.value("agreement_fraction", 0.0)) << ")\n";
    if (s.contains("accuracy_filtered"))
      out << "label accuracy: weak " << format3(s.value("accuracy_weak", 0.0))
          << ", strong " << format3(s.value("accuracy_strong", 0.0)) << ", filtered "
          << format3(s.value("accuracy_filtered", 0.0)) << "\n";
  } else {
    out << "label: not run\n";
  }
  if (const json* cur = find_stage(manifest, "curate")) {
    const json& s = cur->at("summary");
    out << "curate: " << s.value("curated_solutions", 0) << " of "
        << s.value("input_solutions", 0) << " solutions kept, "
        << s.value("curated_step_records", 0) << " step records\n";
    if (s.contains("distribution_before") && s.contains("distribution_after")) {
      const json& db = s.at("distribution_before");
      const json& da = s.at("distribution_after");
      out << "labels: " << format3(db.value("good_fraction", 0.0)) << " good / "
          << format3(db.value("bad_fraction", 0.0)) << " bad, after up-sampling "
          << format3(da.value("good_fraction", 0.0)) << " / "
          << format3(da.value("bad_fraction", 0.0)) << "\n";
    }
  } else {
    out << "curate: not run\n";
  }
  if (const json* tr = find_stage(manifest, "train")) {
    const json& s = tr->at("summary");
    const auto trace = s.value("prm_loss_trace", std::vector<double>{});
    out << "train: " << s.value("step_examples", std::size_t{0})
        << " step examples, " << s.value("outcome_examples", std::size_t{0})
        << " outcome examples";
    if (trace.size() >= 2)
      out << ", loss " << format3(trace.front()) << " -> " << format3(trace.back());
    out << "\n";
  } else {
    out << "train: not run\n";
  }
  const json* ev = find_stage(manifest, "eval");
  if (ev && ev->at("summary").contains("bon")) {
    const json& s = ev->at("summary");
    out << "best-of-" << s.value("bon_n", 0) << " accuracy over "
        << s.value("num_eval_runs", 0) << " runs:\n";
    for (const auto& item : s.at("bon").items())
      out << "  " << std::left << std::setw(18) << item.key() << std::right << " "
          << format3(item.value().value("mean", 0.0)) << " +/- "
          << format3(item.value().value("stddev", 0.0)) << "\n";
  } else {
    out << "best-of-n: not run\n";
  }
  if (ev && ev->at("summary").contains("judge")) {
    const json& jj = ev->at("summary").at("judge");
    out << "judge: macro-F1 " << format3(jj.value("macro_f1", 0.0)) << ", micro-F1 "
        << format3(jj.value("micro_f1", 0.0)) << " over " << jj.value("steps", 0)
        << " steps\n";
  } else {
    out << "judge: not run\n";
  }
  const json* rf = find_stage(manifest, "raft");
  if (rf && rf->at("summary").value("problems", 0) > 0) {
    const json& s = rf->at("summary");
    out << "raft: kept " << s.value("kept", 0) << " of " << s.value("problems", 0)
        << " problems\n";
  } else {
    out << "raft: not run\n";
  }
  if (manifest.contains("ledger")) {
    const json& led = manifest.at("ledger");
    out << "cost: " << led.value("completions_total", std::int64_t{0})
        << " completions";
    if (led.contains("completions_by_completer")) {
      out << " (";
      bool first = true;
      for (const auto& item : led.at("completions_by_completer").items()) {
        if (!first) out << ", ";
        out << item.key() << " " << item.value().get<std::int64_t>();
        first = false;
      }
      out << ")";
    }
    out << "\n";
  } else {
    out << "cost: not run\n";
  }
  return out.str();
}

}  // namespace prmkit::pipeline
