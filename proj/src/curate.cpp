#include "prmkit/curate.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "prmkit/jsonl.hpp"
#include "prmkit/parallel.hpp"
#include "prmkit/verify.hpp"

namespace prmkit::curate {
namespace {

std::set<std::string> ngram_set(const std::vector<std::string>& tokens, int n) {
  std::set<std::string> grams;
  if (static_cast<int>(tokens.size()) < n) return grams;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string g = tokens[i];
    for (int k = 1; k < n; ++k) {
      g.push_back(' ');
      g += tokens[i + static_cast<std::size_t>(k)];
    }
    grams.insert(std::move(g));
  }
  return grams;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b,
               bool texts_equal) {
  if (a.empty() && b.empty()) return texts_equal ? 1.0 : 0.0;
  std::size_t inter = 0;
  for (const auto& g : a) inter += b.count(g);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

const Problem* find_problem(const std::vector<Problem>& problems,
                            const std::string& id) {
  for (const Problem& p : problems)
    if (p.id == id) return &p;
  return nullptr;
}

}  // namespace

void validate(const FilterRules& rules) {
  if (rules.min_tokens < 0) throw std::invalid_argument("min_tokens must be >= 0");
  if (rules.max_tokens <= rules.min_tokens)
    throw std::invalid_argument("max_tokens must be > min_tokens");
  if (rules.repetition_ngram < 1 || rules.dedup_ngram < 1)
    throw std::invalid_argument("ngram order must be >= 1");
  if (rules.repetition_max_count < 1)
    throw std::invalid_argument("repetition_max_count must be >= 1");
  if (rules.dedup_jaccard < 0.0 || rules.dedup_jaccard > 1.0)
    throw std::invalid_argument("dedup_jaccard out of [0,1]");
}

void to_json(nlohmann::json& j, const FilterRules& rules) {
  j = nlohmann::json{{"min_tokens", rules.min_tokens},
                     {"max_tokens", rules.max_tokens},
                     {"repetition_ngram", rules.repetition_ngram},
                     {"repetition_max_count", rules.repetition_max_count},
                     {"dedup_ngram", rules.dedup_ngram},
                     {"dedup_jaccard", rules.dedup_jaccard}};
}

void from_json(const nlohmann::json& j, FilterRules& rules) {
  rules.min_tokens = j.value("min_tokens", rules.min_tokens);
  rules.max_tokens = j.value("max_tokens", rules.max_tokens);
  rules.repetition_ngram = j.value("repetition_ngram", rules.repetition_ngram);
  rules.repetition_max_count =
      j.value("repetition_max_count", rules.repetition_max_count);
  rules.dedup_ngram = j.value("dedup_ngram", rules.dedup_ngram);
  rules.dedup_jaccard = j.value("dedup_jaccard", rules.dedup_jaccard);
}

std::string solution_text(const Solution& solution) {
  std::string out;
  for (std::size_t i = 0; i < solution.steps.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += solution.steps[i].text;
  }
  return out;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

double ngram_jaccard(const std::string& a, const std::string& b, int n) {
  if (n < 1) throw std::invalid_argument("ngram order must be >= 1");
  return jaccard(ngram_set(whitespace_tokens(a), n), ngram_set(whitespace_tokens(b), n),
                 a == b);
}

FilterResult filter_responses(const std::vector<Solution>& solutions,
                              const FilterRules& rules) {
  validate(rules);
  FilterResult out;
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    const Solution& sol = solutions[s];
    const std::string text = solution_text(sol);
    const auto tokens = whitespace_tokens(text);
    const int count = static_cast<int>(tokens.size());
    if (count < rules.min_tokens) {
      out.rejections.push_back({sol.problem_id, static_cast<int>(s), "min_tokens",
                                std::to_string(count) + " tokens < " +
                                    std::to_string(rules.min_tokens)});
      continue;
    }
    if (count > rules.max_tokens) {
      out.rejections.push_back({sol.problem_id, static_cast<int>(s), "max_tokens",
                                std::to_string(count) + " tokens > " +
                                    std::to_string(rules.max_tokens)});
      continue;
    }
    std::map<std::string, int> gram_counts;
    int worst = 0;
    std::string worst_gram;
    if (count >= rules.repetition_ngram) {
      for (std::size_t i = 0;
           i + static_cast<std::size_t>(rules.repetition_ngram) <= tokens.size(); ++i) {
        std::string g = tokens[i];
        for (int k = 1; k < rules.repetition_ngram; ++k) {
          g.push_back(' ');
          g += tokens[i + static_cast<std::size_t>(k)];
        }
        const int c = ++gram_counts[g];
        if (c > worst) {
          worst = c;
          worst_gram = g;
        }
      }
    }
    if (worst > rules.repetition_max_count) {
      out.rejections.push_back({sol.problem_id, static_cast<int>(s), "repetition",
                                "\"" + worst_gram + "\" occurs " +
                                    std::to_string(worst) + " times"});
      continue;
    }
    out.kept.push_back(sol);
    out.kept_indices.push_back(static_cast<int>(s));
  }
  return out;
}

FilterResult ngram_dedup(const std::vector<Solution>& solutions,
                         const FilterRules& rules, int worker_count) {
  validate(rules);

  // group indices by problem, in first-seen order
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    const auto [it, inserted] =
        group_of.try_emplace(solutions[s].problem_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(s);
  }

  // -1 = kept; otherwise the input index of the earlier kept duplicate
  std::vector<std::ptrdiff_t> dup_of(solutions.size(), -1);
  parallel_for(groups.size(), worker_count, [&](std::size_t g) {
    std::vector<std::size_t> kept_in_group;
    std::vector<std::set<std::string>> kept_grams;
    std::vector<std::string> kept_texts;
    for (const std::size_t s : groups[g]) {
      const std::string text = solution_text(solutions[s]);
      auto grams = ngram_set(whitespace_tokens(text), rules.dedup_ngram);
      bool dropped = false;
      for (std::size_t k = 0; k < kept_in_group.size(); ++k) {
        if (jaccard(grams, kept_grams[k], text == kept_texts[k]) >=
            rules.dedup_jaccard) {
          dup_of[s] = static_cast<std::ptrdiff_t>(kept_in_group[k]);
          dropped = true;
          break;
        }
      }
      if (!dropped) {
        kept_in_group.push_back(s);
        kept_grams.push_back(std::move(grams));
        kept_texts.push_back(std::move(text));
      }
    }
  });

  FilterResult out;
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    if (dup_of[s] < 0) {
      out.kept.push_back(solutions[s]);
      out.kept_indices.push_back(static_cast<int>(s));
    } else {
      out.rejections.push_back({solutions[s].problem_id, static_cast<int>(s),
                                "duplicate",
                                "near-duplicate of solution " +
                                    std::to_string(dup_of[s]),
                                static_cast<int>(dup_of[s])});
    }
  }
  return out;
}

FilterResult assign_outcome_labels(const std::vector<Problem>& problems,
                                   const std::vector<Solution>& solutions) {
  std::unordered_map<std::string, const Problem*> by_id;
  for (const Problem& p : problems) by_id[p.id] = &p;

  FilterResult out;
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    const Solution& sol = solutions[s];
    const auto it = by_id.find(sol.problem_id);
    if (it == by_id.end()) {
      out.rejections.push_back({sol.problem_id, static_cast<int>(s), "unknown problem",
                                "no problem with id " + sol.problem_id});
      continue;
    }
    std::string answer = sol.final_answer;
    if (answer.empty()) {
      const auto extracted = verify::try_extract_final_answer(solution_text(sol));
      if (!extracted) {
        out.rejections.push_back(
            {sol.problem_id, static_cast<int>(s), "no answer found",
             "final_answer empty and the text has no answer marker"});
        continue;
      }
      answer = *extracted;
    }
    Solution labeled = sol;
    labeled.final_answer = answer;
    labeled.outcome_label =
        verify::answers_equal(answer, it->second->golden_answer) ? 1 : 0;
    out.kept.push_back(std::move(labeled));
    out.kept_indices.push_back(static_cast<int>(s));
  }
  return out;
}

CurationResult curate_dataset(const std::vector<Problem>& problems,
                              const std::vector<Solution>& solutions,
                              const std::vector<label::LabeledStepRecord>& step_records,
                              const FilterRules& rules, int worker_count) {
  auto filtered = filter_responses(solutions, rules);
  auto deduped = ngram_dedup(filtered.kept, rules, worker_count);
  auto labeled = assign_outcome_labels(problems, deduped.kept);

  CurationResult out;
  out.solutions = std::move(labeled.kept);
  out.original_indices.reserve(out.solutions.size());
  for (const int k : labeled.kept_indices)
    out.original_indices.push_back(
        filtered.kept_indices[static_cast<std::size_t>(
            deduped.kept_indices[static_cast<std::size_t>(k)])]);

  out.rejections = std::move(filtered.rejections);
  for (Rejection r : deduped.rejections) {
    r.solution_index =
        filtered.kept_indices[static_cast<std::size_t>(r.solution_index)];
    if (r.duplicate_of >= 0) {
      r.duplicate_of = filtered.kept_indices[static_cast<std::size_t>(r.duplicate_of)];
      r.detail = "near-duplicate of solution " + std::to_string(r.duplicate_of);
    }
    out.rejections.push_back(std::move(r));
  }
  for (Rejection r : labeled.rejections) {
    r.solution_index = filtered.kept_indices[static_cast<std::size_t>(
        deduped.kept_indices[static_cast<std::size_t>(r.solution_index)])];
    out.rejections.push_back(std::move(r));
  }
  // a solution is rejected by at most one phase, so indices are unique
  std::sort(out.rejections.begin(), out.rejections.end(),
            [](const Rejection& a, const Rejection& b) {
              return a.solution_index < b.solution_index;
            });

  std::vector<int> new_index(solutions.size(), -1);
  for (std::size_t c = 0; c < out.original_indices.size(); ++c)
    new_index[static_cast<std::size_t>(out.original_indices[c])] =
        static_cast<int>(c);
  for (label::LabeledStepRecord rec : step_records) {
    if (rec.solution_index < 0 ||
        rec.solution_index >= static_cast<int>(solutions.size()))
      throw std::invalid_argument("solution_index out of range");
    const int remapped = new_index[static_cast<std::size_t>(rec.solution_index)];
    if (remapped < 0) continue;  // solution curated away
    rec.solution_index = remapped;
    out.steps.push_back(std::move(rec));
  }
  return out;
}

std::vector<label::LabeledStepRecord> upsample_negatives(
    const std::vector<label::LabeledStepRecord>& records, int rate) {
  if (rate < 1) throw std::invalid_argument("rate must be >= 1");
  std::vector<label::LabeledStepRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(r);
    if (r.label == 0)
      for (int k = 1; k < rate; ++k) out.push_back(r);
  }
  return out;
}

LabelDistribution label_distribution(const std::vector<label::LabeledStepRecord>& records) {
  LabelDistribution d;
  for (const auto& r : records) (r.label == 1 ? d.good_count : d.bad_count)++;
  const std::int64_t total = d.good_count + d.bad_count;
  if (total > 0) {
    d.good_fraction = static_cast<double>(d.good_count) / static_cast<double>(total);
    d.bad_fraction = static_cast<double>(d.bad_count) / static_cast<double>(total);
  }
  return d;
}

std::string export_prm_training(const std::vector<label::LabeledStepRecord>& records,
                                const std::vector<Problem>& problems,
                                const std::vector<Solution>& solutions) {
  // (solution_index, step_index) ascending; stable for equal keys
  std::vector<const label::LabeledStepRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return a->solution_index != b->solution_index
               ? a->solution_index < b->solution_index
               : a->step_index < b->step_index;
  });

  std::ostringstream out;
  std::size_t i = 0;
  while (i < ordered.size()) {
    const int sol_index = ordered[i]->solution_index;
    if (sol_index < 0 || sol_index >= static_cast<int>(solutions.size()))
      throw std::invalid_argument("solution_index out of range");
    const Solution& sol = solutions[static_cast<std::size_t>(sol_index)];
    const Problem* prob = find_problem(problems, sol.problem_id);
    if (!prob) throw std::runtime_error("unknown problem_id " + sol.problem_id);

    std::string text, labels;
    for (; i < ordered.size() && ordered[i]->solution_index == sol_index; ++i) {
      const auto& r = *ordered[i];
      if (r.step_index < 0 || r.step_index >= static_cast<int>(sol.steps.size()))
        throw std::invalid_argument("step_index out of range");
      const std::string& step_text =
          sol.steps[static_cast<std::size_t>(r.step_index)].text;
      if (step_text.find(kStepToken) != std::string::npos)
        throw std::invalid_argument("step text contains reserved token <step>");
      text += step_text;
      text += kStepToken;
      labels.push_back(r.label == 1 ? '+' : '-');
    }
    out << json{{"labels", labels}, {"prompt", prob->prompt}, {"text", text}}.dump()
        << '\n';
  }
  return out.str();
}

std::string export_orm_training(const std::vector<Problem>& problems,
                                const std::vector<Solution>& solutions) {
  std::ostringstream out;
  for (const Solution& sol : solutions) {
    if (!sol.outcome_label) throw std::runtime_error("missing outcome_label");
    const Problem* prob = find_problem(problems, sol.problem_id);
    if (!prob) throw std::runtime_error("unknown problem_id " + sol.problem_id);
    const std::string text = solution_text(sol);
    if (text.find(kStepToken) != std::string::npos)
      throw std::invalid_argument("step text contains reserved token <step>");
    out << json{{"label", std::string(1, *sol.outcome_label == 1 ? '+' : '-')},
                {"prompt", prob->prompt},
                {"text", text + kStepToken}}
               .dump()
        << '\n';
  }
  return out.str();
}

std::vector<PrmExportRecord> import_prm_training(const std::string& bytes) {
  std::vector<PrmExportRecord> out;
  for (const json& j : parse_jsonl(bytes, "prm export")) {
    PrmExportRecord rec;
    j.at("prompt").get_to(rec.prompt);
    j.at("labels").get_to(rec.labels);
    std::string text = j.at("text").get<std::string>();
    const std::string token = kStepToken;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t next = text.find(token, pos);
      if (next == std::string::npos)
        throw std::runtime_error("text not terminated by " + token);
      rec.steps.push_back(text.substr(pos, next - pos));
      pos = next + token.size();
    }
    if (rec.labels.size() != rec.steps.size())
      throw std::runtime_error("label count mismatch: " +
                               std::to_string(rec.labels.size()) + " labels for " +
                               std::to_string(rec.steps.size()) + " steps");
    for (char c : rec.labels)
      if (c != '+' && c != '-') throw std::runtime_error("bad label char");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<OrmExportRecord> import_orm_training(const std::string& bytes) {
  std::vector<OrmExportRecord> out;
  for (const json& j : parse_jsonl(bytes, "orm export")) {
    OrmExportRecord rec;
    j.at("prompt").get_to(rec.prompt);
    const std::string label = j.at("label").get<std::string>();
    if (label != "+" && label != "-") throw std::runtime_error("bad label char");
    rec.label = label[0];
    std::string text = j.at("text").get<std::string>();
    const std::string token = kStepToken;
    if (text.size() < token.size() ||
        text.compare(text.size() - token.size(), token.size(), token) != 0)
      throw std::runtime_error("text not terminated by " + token);
    rec.text = text.substr(0, text.size() - token.size());
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace prmkit::curate
