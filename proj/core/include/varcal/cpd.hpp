#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace varcal {

/// Absolute tolerance for "probabilities sum to one" checks.
inline constexpr double kCpdMassTolerance = 1e-9;

/// Categorical distribution over word strings. Shared representation for
/// human, oracle and model uncertainty. Entries hold strictly positive
/// probabilities that sum to one; zero-probability words are never stored.
/// Immutable after construction and safe to share across threads.
class Cpd {
 public:
  using Entries = std::map<std::string, double>;

  Cpd() = default;

  /// Validates and normalizes the invariants: drops exact zeros, rejects
  /// negative or non-finite probabilities, rejects masses off by more than
  /// kCpdMassTolerance from one.
  static Cpd from_entries(Entries entries);

  const Entries& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Probability of a word; zero when outside the support.
  double probability(const std::string& word) const;

  bool operator==(const Cpd& other) const { return entries_ == other.entries_; }

 private:
  explicit Cpd(Entries entries) : entries_(std::move(entries)) {}
  Entries entries_;
};

/// Multiset of observed words with positive counts.
struct WordCounts {
  std::map<std::string, long> counts;
  long total = 0;

  void add(const std::string& word, long count = 1);
  bool empty() const { return counts.empty(); }
};

/// Case-folds, strips surrounding punctuation and whitespace, keeps internal
/// apostrophes and hyphens. Returns the empty string when nothing remains.
/// Folding covers ASCII and Latin-1; curly quotes and unicode hyphens are
/// mapped to their ASCII forms first. Idempotent.
std::string normalize_word(std::string_view raw);

/// Shared word scanner: skips leading whitespace, then takes the maximal run
/// of letters/digits with internal apostrophes and hyphens, normalized. A run
/// that reaches the end of `text` counts as complete only when
/// `treat_end_as_boundary` is set (finished strings such as human answers);
/// otherwise it is treated as possibly truncated and rejected. Returns
/// nullopt when no complete word is found.
std::optional<std::string> first_word(std::string_view text,
                                      bool treat_end_as_boundary);

/// Relative-frequency estimate. Throws EstimationError on empty counts.
Cpd mle(const WordCounts& counts);

/// Total variation distance over the union of supports: 1/2 sum |p - q|.
double tvd(const Cpd& p, const Cpd& q);

/// Shannon entropy in nats: -sum p ln p.
double entropy(const Cpd& p);

enum class TieBreak {
  kLexicographic,  // smallest word wins (default)
  kSeededRandom,   // uniform among tied words, seeded
};

struct ModeResult {
  std::string word;
  double probability = 0.0;
  bool tied = false;
};

/// Word with maximal probability. Ties are resolved by `rule` and reported
/// via ModeResult::tied.
ModeResult mode(const Cpd& p, TieBreak rule = TieBreak::kLexicographic,
                std::uint64_t seed = 0);

}  // namespace varcal
