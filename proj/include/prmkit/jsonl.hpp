#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prmkit/types.hpp"

namespace prmkit {

using json = nlohmann::json;

// --- core type serializers -------------------------------------------------
// Keys are emitted in sorted order (nlohmann::json is tree-backed), so a
// given value always serializes to the same bytes. Optional fields are
// omitted when absent.

inline void to_json(json& j, const Problem& p) {
  j = json{{"id", p.id},           {"prompt", p.prompt},
           {"golden_answer", p.golden_answer}, {"difficulty", p.difficulty},
           {"plan_length", p.plan_length},     {"seed", p.seed}};
}

inline void from_json(const json& j, Problem& p) {
  j.at("id").get_to(p.id);
  j.at("prompt").get_to(p.prompt);
  j.at("golden_answer").get_to(p.golden_answer);
  j.at("difficulty").get_to(p.difficulty);
  j.at("plan_length").get_to(p.plan_length);
  j.at("seed").get_to(p.seed);
}

inline void to_json(json& j, const StepLabelEstimate& e) {
  j = json{{"soft", e.soft},
           {"hard", e.hard},
           {"rollouts", e.rollouts},
           {"correct_rollouts", e.correct_rollouts}};
}

inline void from_json(const json& j, StepLabelEstimate& e) {
  // re-derive through the factory so the arithmetic invariants hold
  e = make_estimate(j.at("rollouts").get<int>(),
                    j.at("correct_rollouts").get<int>());
}

inline void to_json(json& j, const Step& s) {
  j = json{{"text", s.text}, {"features", s.features}};
  if (s.truth_label)
    j["truth_label"] = *s.truth_label == TruthLabel::correct ? "correct" : "incorrect";
  if (s.estimated_label) j["estimated_label"] = *s.estimated_label;
}

inline void from_json(const json& j, Step& s) {
  j.at("text").get_to(s.text);
  j.at("features").get_to(s.features);
  s.truth_label.reset();
  if (j.contains("truth_label")) {
    const auto t = j.at("truth_label").get<std::string>();
    if (t == "correct") s.truth_label = TruthLabel::correct;
    else if (t == "incorrect") s.truth_label = TruthLabel::incorrect;
    else throw std::invalid_argument("bad truth_label value: " + t);
  }
  s.estimated_label.reset();
  if (j.contains("estimated_label"))
    s.estimated_label = j.at("estimated_label").get<StepLabelEstimate>();
}

inline void to_json(json& j, const Solution& s) {
  j = json{{"problem_id", s.problem_id},
           {"steps", s.steps},
           {"final_answer", s.final_answer},
           {"source_policy", s.source_policy}};
  if (s.outcome_label) j["outcome_label"] = *s.outcome_label;
}

inline void from_json(const json& j, Solution& s) {
  j.at("problem_id").get_to(s.problem_id);
  j.at("steps").get_to(s.steps);
  j.at("final_answer").get_to(s.final_answer);
  j.at("source_policy").get_to(s.source_policy);
  s.outcome_label.reset();
  if (j.contains("outcome_label")) s.outcome_label = j.at("outcome_label").get<int>();
}

inline void to_json(json& j, const CompleterConfig& c) {
  j = json{{"name", c.name},
           {"p_solve_base", c.p_solve_base},
           {"difficulty_slope", c.difficulty_slope},
           {"p_recover", c.p_recover},
           {"seed_offset", c.seed_offset}};
}

inline void from_json(const json& j, CompleterConfig& c) {
  j.at("name").get_to(c.name);
  j.at("p_solve_base").get_to(c.p_solve_base);
  j.at("difficulty_slope").get_to(c.difficulty_slope);
  j.at("p_recover").get_to(c.p_recover);
  j.at("seed_offset").get_to(c.seed_offset);
  validate(c);
}

// --- file helpers ------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& bytes);

// Parses one JSON value per line; empty lines are skipped. Errors carry the
// file path and 1-based line number.
std::vector<json> parse_jsonl(const std::string& bytes, const std::string& origin);

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  const auto values = parse_jsonl(read_text_file(path), path.string());
  std::vector<T> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    try {
      out.push_back(values[i].get<T>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": record " + std::to_string(i + 1) +
                               ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::string to_jsonl_string(const std::vector<T>& items) {
  std::ostringstream out;
  for (const T& item : items) out << json(item).dump() << '\n';
  return out.str();
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
  write_text_file(path, to_jsonl_string(items));
}

}  // namespace prmkit
