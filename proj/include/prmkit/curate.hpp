#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "prmkit/label.hpp"
#include "prmkit/types.hpp"

namespace prmkit::curate {

struct FilterRules {
  int min_tokens = 5;
  int max_tokens = 2048;
  int repetition_ngram = 3;       // n-gram order for the repetition rule
  int repetition_max_count = 10;  // reject when any n-gram repeats more often
  int dedup_ngram = 3;            // n-gram order for near-duplicate detection
  double dedup_jaccard = 0.8;     // similarity at or above this is a duplicate
};

void validate(const FilterRules& rules);

void to_json(nlohmann::json& j, const FilterRules& rules);
void from_json(const nlohmann::json& j, FilterRules& rules);

struct Rejection {
  std::string problem_id;
  int solution_index = 0;  // index into the function's input vector
  std::string rule;        // "min_tokens", "max_tokens", "repetition",
                           // "duplicate", "no answer found", "unknown problem"
  std::string detail;
  int duplicate_of = -1;   // "duplicate" only: the kept solution it matched
};

// Step texts joined with a blank line; the unit of token counting,
// repetition checks, and dedup.
std::string solution_text(const Solution& solution);

std::vector<std::string> whitespace_tokens(const std::string& text);

// Jaccard similarity of the word n-gram sets of two texts. When both sets
// are empty (texts shorter than n words): 1 if the texts are equal, else 0.
double ngram_jaccard(const std::string& a, const std::string& b, int n);

struct FilterResult {
  std::vector<Solution> kept;
  std::vector<int> kept_indices;  // into the input vector
  std::vector<Rejection> rejections;
};

// Length and repetition rules, applied in order: token count in
// [min_tokens, max_tokens], then no word n-gram occurring more than
// repetition_max_count times.
FilterResult filter_responses(const std::vector<Solution>& solutions,
                              const FilterRules& rules);

// Near-duplicate removal per problem: scan in input order, drop a solution
// whose n-gram Jaccard against any previously kept solution of the same
// problem reaches dedup_jaccard. Problems are independent, so groups can
// run on workers; output order and content never depend on worker_count.
FilterResult ngram_dedup(const std::vector<Solution>& solutions,
                         const FilterRules& rules, int worker_count = 1);

// Fills outcome_label from answer equivalence against the problem's golden
// answer. A missing final_answer falls back to extraction from the
// solution text; solutions yielding no answer, or referencing an unknown
// problem, are rejected rather than guessed at.
FilterResult assign_outcome_labels(const std::vector<Problem>& problems,
                                   const std::vector<Solution>& solutions);

struct CurationResult {
  std::vector<Solution> solutions;              // curated, outcome-labeled
  std::vector<int> original_indices;            // curated index -> input index
  std::vector<label::LabeledStepRecord> steps;  // remapped to curated indices
  std::vector<Rejection> rejections;            // input indices throughout
};

// The full curation pass: length/repetition filter, per-problem dedup,
// outcome labeling; step records pointing at surviving solutions are
// remapped to the curated index space, the rest are dropped with their
// solutions. Rejections from every phase are reported against the input
// index space, ordered by index.
CurationResult curate_dataset(const std::vector<Problem>& problems,
                              const std::vector<Solution>& solutions,
                              const std::vector<label::LabeledStepRecord>& step_records,
                              const FilterRules& rules, int worker_count = 1);

// Each negative (label 0) record appears `rate` times, positives once;
// copies sit next to their original. rate must be >= 1; 1 is the identity.
std::vector<label::LabeledStepRecord> upsample_negatives(
    const std::vector<label::LabeledStepRecord>& records, int rate);

struct LabelDistribution {
  std::int64_t good_count = 0;
  std::int64_t bad_count = 0;
  double good_fraction = 0.0;  // 0 on empty input
  double bad_fraction = 0.0;
};

LabelDistribution label_distribution(const std::vector<label::LabeledStepRecord>& records);

// --- training-file exports ---------------------------------------------------
// One JSON object per line. The text field carries the step texts, each
// terminated by the "<step>" token; labels is one '+' or '-' per step, in
// step order. The outcome export treats the whole response as a single
// step. Step texts containing the reserved token are rejected.

inline constexpr const char* kStepToken = "<step>";

std::string export_prm_training(const std::vector<label::LabeledStepRecord>& records,
                                const std::vector<Problem>& problems,
                                const std::vector<Solution>& solutions);

std::string export_orm_training(const std::vector<Problem>& problems,
                                const std::vector<Solution>& solutions);

struct PrmExportRecord {
  std::string prompt;
  std::vector<std::string> steps;
  std::string labels;  // '+'/'-', one per step
};

std::vector<PrmExportRecord> import_prm_training(const std::string& bytes);

struct OrmExportRecord {
  std::string prompt;
  std::string text;
  char label = '+';
};

std::vector<OrmExportRecord> import_orm_training(const std::string& bytes);

// --- serialization -----------------------------------------------------------

inline void to_json(nlohmann::json& j, const Rejection& r) {
  j = nlohmann::json{{"problem_id", r.problem_id},
                     {"solution_index", r.solution_index},
                     {"rule", r.rule},
                     {"detail", r.detail}};
  if (r.duplicate_of >= 0) j["duplicate_of"] = r.duplicate_of;
}

inline void from_json(const nlohmann::json& j, Rejection& r) {
  j.at("problem_id").get_to(r.problem_id);
  j.at("solution_index").get_to(r.solution_index);
  j.at("rule").get_to(r.rule);
  j.at("detail").get_to(r.detail);
  r.duplicate_of = j.value("duplicate_of", -1);
}

}  // namespace prmkit::curate
