#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "prmkit/curate.hpp"
#include "prmkit/evalkit.hpp"
#include "prmkit/label.hpp"
#include "prmkit/score.hpp"
#include "prmkit/simulate.hpp"
#include "prmkit/types.hpp"

namespace prmkit::pipeline {

// Configuration error with the offending field path in the message.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CountsConfig {
  int num_problems = 200;         // labeling pool
  int solutions_per_problem = 4;  // sampled per pool problem
  int num_eval_problems = 100;    // 0 skips the selector comparison
  int num_judge_problems = 50;    // 0 skips the judge section
  int num_raft_problems = 100;    // 0 skips the selection stage
};

struct PipelineConfig {
  RunConfig run;
  sim::SimulatorConfig simulator;
  CompleterConfig policy{"policy", 0.88, 0.15, 0.05, 0};
  CompleterConfig weak_completer{"weak", 0.35, 0.25, 0.03, 1};
  CompleterConfig strong_completer{"strong", 0.90, 0.25, 0.30, 2};
  curate::FilterRules filter_rules;
  label::LabelOptions label_opts;  // rollouts_t is overridden by run.num_rollouts_t
  // Heavier than the bare TrainConfig defaults: the outcome scorer needs the
  // bias settled before the weights carry signal, which one epoch at 1e-2
  // leaves half-done on an imbalanced corpus.
  score::TrainConfig train{0.05, 12, 32, 0};
  int upsample_rate = 2;
  bool two_phase = true;
  score::Aggregation aggregation = score::Aggregation::minimum;
  CountsConfig counts;
};

void validate(const PipelineConfig& cfg);

// Strict parse: unknown keys and ill-typed values raise ConfigError naming
// the field path. Absent fields keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);

// Reads and parses a JSON file; parse errors carry the 1-based line number.
nlohmann::json parse_json_file(const std::filesystem::path& path);
PipelineConfig load_config(const std::filesystem::path& path);

// Best-of-N accuracy for the five selectors (zero-shot, self-consistency,
// orm-rank, prm-rank, pass-at-n) on shared candidate pools. Returns the
// "bon" report object keyed by selector name.
nlohmann::json selector_comparison(const std::vector<Problem>& problems,
                                   const sim::SimulatorConfig& sim_cfg,
                                   const CompleterConfig& policy,
                                   const score::ScorerParams& prm_params,
                                   const score::ScorerParams& orm_params,
                                   score::Aggregation aggregation,
                                   const RunConfig& run_cfg);

// Step-label F1 of the scorer against simulator truth, split into
// difficulty subsets (easy < 0.5 <= hard); reports per-subset, macro, and
// micro F1. Solutions must carry truth labels.
nlohmann::json judge_report(const std::vector<Problem>& problems,
                            const std::vector<Solution>& solutions,
                            const score::ScorerParams& prm_params);

struct RaftOutput {
  std::string sft_jsonl;  // one selected solution per kept problem
  nlohmann::json summary;
};

// Samples run_cfg.raft_m candidates per problem and applies the
// correct-count window + dedup + reward-argmax selection.
RaftOutput raft_selection(const std::vector<Problem>& problems,
                          const sim::SimulatorConfig& sim_cfg,
                          const CompleterConfig& policy,
                          const score::ScorerParams& prm_params,
                          score::Aggregation aggregation,
                          const curate::FilterRules& filter_rules,
                          const RunConfig& run_cfg, std::uint64_t sample_stream);

// The full run: generate problems, sample the policy, Monte Carlo label
// with both completers, curate and export, train the scorers, compare
// selectors, and select fine-tuning data. Artifacts land in out_dir;
// manifest.json (written last) fingerprints every artifact. Bytes are a
// pure function of the config: no timestamps, no absolute paths, no
// dependence on worker_count. On failure, files created by this run are
// removed.
void run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

// Renders a human-readable summary of a manifest; absent sections are
// reported as "not run".
std::string report(const std::filesystem::path& manifest_path);

}  // namespace prmkit::pipeline
