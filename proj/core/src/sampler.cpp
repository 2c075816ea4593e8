#include "varcal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

namespace {

// Scores arrive as log f(c,w) - log f(c); anything above zero by more than
// this is an inconsistent scorer rather than rounding noise.
constexpr double kLogJointTolerance = 1e-6;

}  // namespace

std::string_view prompt_mode_name(PromptMode mode) {
  switch (mode) {
    case PromptMode::kCompletion:
      return "completion";
    case PromptMode::kChatIndependent:
      return "chat_independent";
    case PromptMode::kChatDiverse:
      return "chat_diverse";
  }
  throw InputError("unknown prompt mode value");
}

PromptMode prompt_mode_from_name(std::string_view name) {
  if (name == "completion") return PromptMode::kCompletion;
  if (name == "chat_independent") return PromptMode::kChatIndependent;
  if (name == "chat_diverse") return PromptMode::kChatDiverse;
  throw InputError("unknown prompt mode: \"" + std::string(name) + "\"");
}

std::string_view candidate_origin_name(CandidateOrigin origin) {
  switch (origin) {
    case CandidateOrigin::kUnbiasedSample:
      return "unbiased_sample";
    case CandidateOrigin::kNucleusSample:
      return "nucleus_sample";
    case CandidateOrigin::kGreedy:
      return "greedy";
    case CandidateOrigin::kCorpusWord:
      return "corpus_word";
    case CandidateOrigin::kHumanWord:
      return "human_word";
  }
  throw InputError("unknown candidate origin value");
}

std::optional<std::string> slice_first_word(std::string_view raw_text) {
  // Model text may have been cut off by the length cap, so a word run that
  // reaches the end of the text has no confirmed boundary and is rejected.
  return first_word(raw_text, /*treat_end_as_boundary=*/false);
}

Cpd mc_estimate(std::span<const GenerationRecord> records) {
  WordCounts counts;
  for (const auto& record : records) {
    if (record.rejected || !record.sliced_word.has_value()) continue;
    counts.add(*record.sliced_word);
  }
  if (counts.total == 0) {
    throw EstimationError(
        "mc_estimate: no non-rejected generations to estimate from");
  }
  return mle(counts);
}

std::vector<std::pair<std::string, CandidateOrigin>> build_candidate_pool(
    const CandidateSources& sources) {
  std::map<std::string, CandidateOrigin> pool;
  auto add = [&pool](const std::string& raw, CandidateOrigin origin) {
    std::string word = normalize_word(raw);
    if (word.empty()) return;
    pool.emplace(std::move(word), origin);  // first origin wins
  };
  for (const auto& w : sources.unbiased_samples)
    add(w, CandidateOrigin::kUnbiasedSample);
  for (const auto& w : sources.nucleus_samples)
    add(w, CandidateOrigin::kNucleusSample);
  if (sources.greedy_word) add(*sources.greedy_word, CandidateOrigin::kGreedy);
  if (sources.corpus_word)
    add(*sources.corpus_word, CandidateOrigin::kCorpusWord);
  for (const auto& w : sources.human_words)
    add(w, CandidateOrigin::kHumanWord);
  return {pool.begin(), pool.end()};
}

ReplayScorer::ReplayScorer(std::istream& jsonl) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(jsonl, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("replay file line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (!row.contains("context_id") || !row.contains("word") ||
        !row.contains("log_joint")) {
      throw SchemaError("replay file line " + std::to_string(line_no) +
                        ": expected context_id, word, log_joint");
    }
    const double value = row.at("log_joint").get<double>();
    scores_[{row.at("context_id").get<std::string>(),
             row.at("word").get<std::string>()}] = value;
  }
}

std::optional<double> ReplayScorer::log_joint(const Context& context,
                                              const std::string& word) {
  auto it = scores_.find({context.context_id, word});
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

std::vector<ScoredCandidate> score_candidates(
    const Context& context,
    const std::vector<std::pair<std::string, CandidateOrigin>>& words,
    LogprobScorer& scorer) {
  std::vector<ScoredCandidate> scored;
  scored.reserve(words.size());
  std::vector<std::string> missing;
  for (const auto& [word, origin] : words) {
    auto value = scorer.log_joint(context, word);
    if (!value.has_value()) {
      missing.push_back(word);
      continue;
    }
    if (!std::isfinite(*value)) {
      throw ScoringError("non-finite log probability for \"" + word +
                         "\" in context " + context.context_id);
    }
    if (*value > kLogJointTolerance) {
      throw ScoringError("positive log probability " + std::to_string(*value) +
                         " for \"" + word + "\" in context " +
                         context.context_id);
    }
    scored.push_back({word, *value, origin});
  }
  if (!missing.empty()) {
    std::string msg = "missing scores in context " + context.context_id + ":";
    for (const auto& w : missing) msg += " \"" + w + "\"";
    throw MissingScoreError(msg);
  }
  return scored;
}

Cpd biased_estimate(const std::vector<ScoredCandidate>& candidates) {
  if (candidates.empty()) {
    throw EstimationError("biased_estimate: empty candidate set");
  }
  std::map<std::string, double> log_joint;
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& cand : candidates) {
    if (!std::isfinite(cand.log_joint)) {
      throw ScoringError("biased_estimate: non-finite score for \"" +
                         cand.word + "\"");
    }
    auto [it, inserted] = log_joint.emplace(cand.word, cand.log_joint);
    if (!inserted && it->second != cand.log_joint) {
      throw InputError("biased_estimate: conflicting scores for \"" +
                       cand.word + "\"");
    }
    max_log = std::max(max_log, cand.log_joint);
  }
  double denom = 0.0;
  for (const auto& [word, lj] : log_joint) denom += std::exp(lj - max_log);
  const double log_denom = max_log + std::log(denom);
  std::map<std::string, double> entries;
  for (const auto& [word, lj] : log_joint) {
    entries[word] = std::exp(lj - log_denom);
  }
  return Cpd::from_entries(std::move(entries));
}

namespace {

GenerationRecord record_from_json(const ordered_json& row,
                                  std::size_t line_no) {
  for (const char* key :
       {"context_id", "model_id", "sample_index", "raw_text", "sliced_word",
        "rejected", "temperature", "prompt_mode", "seed"}) {
    if (!row.contains(key)) {
      throw SchemaError("generations line " + std::to_string(line_no) +
                        ": missing key \"" + key + "\"");
    }
  }
  GenerationRecord rec;
  rec.context_id = row.at("context_id").get<std::string>();
  rec.model_id = row.at("model_id").get<std::string>();
  rec.sample_index = row.at("sample_index").get<int>();
  rec.raw_text = row.at("raw_text").get<std::string>();
  if (!row.at("sliced_word").is_null()) {
    rec.sliced_word = row.at("sliced_word").get<std::string>();
  }
  rec.rejected = row.at("rejected").get<bool>();
  rec.temperature = row.at("temperature").get<double>();
  rec.prompt_mode =
      prompt_mode_from_name(row.at("prompt_mode").get<std::string>());
  if (!row.at("seed").is_null()) rec.seed = row.at("seed").get<long>();
  if (rec.rejected == rec.sliced_word.has_value()) {
    throw IntegrityError("generations line " + std::to_string(line_no) +
                         ": rejected flag inconsistent with sliced_word");
  }
  return rec;
}

}  // namespace

std::string generation_to_json_line(const GenerationRecord& record) {
  ordered_json row;
  row["context_id"] = record.context_id;
  row["model_id"] = record.model_id;
  row["sample_index"] = record.sample_index;
  row["raw_text"] = record.raw_text;
  if (record.sliced_word)
    row["sliced_word"] = *record.sliced_word;
  else
    row["sliced_word"] = nullptr;
  row["rejected"] = record.rejected;
  row["temperature"] = record.temperature;
  row["prompt_mode"] = std::string(prompt_mode_name(record.prompt_mode));
  if (record.seed)
    row["seed"] = *record.seed;
  else
    row["seed"] = nullptr;
  return row.dump();
}

std::vector<GenerationRecord> read_generations_jsonl(std::istream& in) {
  std::vector<GenerationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("generations line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    records.push_back(record_from_json(row, line_no));
  }
  return records;
}

void write_generations_jsonl(std::ostream& out,
                             std::span<const GenerationRecord> records) {
  for (const auto& record : records) {
    out << generation_to_json_line(record) << '\n';
  }
}

std::map<std::string, std::vector<GenerationRecord>> group_by_context(
    std::vector<GenerationRecord> records) {
  std::map<std::string, std::vector<GenerationRecord>> grouped;
  for (auto& record : records) {
    grouped[record.context_id].push_back(std::move(record));
  }
  return grouped;
}

}  // namespace varcal
