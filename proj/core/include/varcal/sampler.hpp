#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varcal/corpus.hpp"
#include "varcal/cpd.hpp"

namespace varcal {

enum class PromptMode {
  kCompletion,       // raw continuation of the context
  kChatIndependent,  // one chat request per sample
  kChatDiverse,      // one chat request returning a word list
};

std::string_view prompt_mode_name(PromptMode mode);
PromptMode prompt_mode_from_name(std::string_view name);

/// One model draw for a context: raw text, sliced word or rejection flag,
/// sampling metadata. rejected <=> sliced_word absent.
struct GenerationRecord {
  std::string context_id;
  std::string model_id;
  int sample_index = 0;
  std::string raw_text;
  std::optional<std::string> sliced_word;
  bool rejected = false;
  double temperature = 1.0;
  PromptMode prompt_mode = PromptMode::kCompletion;
  std::optional<long> seed;
};

struct RejectionStats {
  long attempts = 0;
  long rejections = 0;

  double rejection_rate() const {
    return attempts > 0 ? static_cast<double>(rejections) /
                              static_cast<double>(attempts)
                        : 0.0;
  }
};

/// Slices the first complete word from model output. Rejection (nullopt) is
/// a value, not a failure: it covers empty output, output with no leading
/// word characters, and a word run that hits the end of the text without a
/// boundary (possibly truncated by the generation length cap).
std::optional<std::string> slice_first_word(std::string_view raw_text);

/// Unbiased Monte Carlo estimate: relative frequency of sliced words over
/// non-rejected records. Rejected records are excluded from the denominator.
/// Throws EstimationError when every record is rejected.
Cpd mc_estimate(std::span<const GenerationRecord> records);

enum class CandidateOrigin {
  kUnbiasedSample,
  kNucleusSample,
  kGreedy,
  kCorpusWord,
  kHumanWord,
};

std::string_view candidate_origin_name(CandidateOrigin origin);

/// A word with its joint log-probability log f(c,w) - log f(c) under the
/// scoring model.
struct ScoredCandidate {
  std::string word;
  double log_joint = 0.0;
  CandidateOrigin origin = CandidateOrigin::kUnbiasedSample;
};

/// Word sets feeding the biased estimator's support.
struct CandidateSources {
  std::vector<std::string> unbiased_samples;
  std::vector<std::string> nucleus_samples;
  std::optional<std::string> greedy_word;
  std::optional<std::string> corpus_word;
  std::vector<std::string> human_words;
};

/// Normalizes and deduplicates the union of the sources. A word keeps the
/// origin of the first source set that contributed it (source order as
/// declared in CandidateSources).
std::vector<std::pair<std::string, CandidateOrigin>> build_candidate_pool(
    const CandidateSources& sources);

/// Source of joint log-probabilities for candidate scoring.
class LogprobScorer {
 public:
  virtual ~LogprobScorer() = default;
  /// log f(c, w) - log f(c), or nullopt when the scorer has no value.
  virtual std::optional<double> log_joint(const Context& context,
                                          const std::string& word) = 0;
};

/// Replay file of precomputed scores, JSONL rows
/// {"context_id", "word", "log_joint"}.
class ReplayScorer : public LogprobScorer {
 public:
  explicit ReplayScorer(std::istream& jsonl);
  std::optional<double> log_joint(const Context& context,
                                  const std::string& word) override;

 private:
  std::map<std::pair<std::string, std::string>, double> scores_;
};

/// Scores every candidate word. Throws MissingScoreError listing the words
/// the scorer lacks, and ScoringError for non-finite values or
/// log-probabilities above zero beyond tolerance.
std::vector<ScoredCandidate> score_candidates(
    const Context& context,
    const std::vector<std::pair<std::string, CandidateOrigin>>& words,
    LogprobScorer& scorer);

/// Renormalizes candidate joint probabilities over the candidate support via
/// log-sum-exp. The output support is exactly the candidate word set.
Cpd biased_estimate(const std::vector<ScoredCandidate>& candidates);

// Generations JSONL, one record per line:
// {"context_id","model_id","sample_index","raw_text","sliced_word",
//  "rejected","temperature","prompt_mode","seed"}
std::vector<GenerationRecord> read_generations_jsonl(std::istream& in);
void write_generations_jsonl(std::ostream& out,
                             std::span<const GenerationRecord> records);
std::string generation_to_json_line(const GenerationRecord& record);

/// Groups records by context_id, preserving record order within a context.
std::map<std::string, std::vector<GenerationRecord>> group_by_context(
    std::vector<GenerationRecord> records);

}  // namespace varcal
