#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varcal/corpus.hpp"
#include "varcal/cpd.hpp"

namespace varcal {

enum class GoldConvention {
  kOriginalCorpusWord,  // the word the passage actually continues with
  kHumanMajority,       // mode of the full human cpd
  kOracleMajority,      // mode of oracle_a
};

inline constexpr std::array<GoldConvention, 3> kAllGoldConventions = {
    GoldConvention::kOriginalCorpusWord, GoldConvention::kHumanMajority,
    GoldConvention::kOracleMajority};

std::string_view gold_convention_name(GoldConvention convention);
GoldConvention gold_convention_from_name(std::string_view name);

struct CalibrationPoint {
  double confidence = 0.0;  // in [0,1]
  bool correct = false;
};

/// Seeded disjoint split of a context's human answers into two halves, each
/// treated as an independent annotator population.
struct OracleSplit {
  std::string context_id;
  Cpd oracle_a;  // "oracle" system; also the oracle-majority gold source
  Cpd oracle_b;  // "human" system
  std::pair<long, long> sizes{0, 0};
  std::uint64_t seed = 0;
};

/// (⌊N/2⌋, N − ⌊N/2⌋).
std::pair<long, long> default_oracle_sizes(long total);

/// Draws sizes.first + sizes.second responses without replacement (seeded,
/// deterministic) and converts each half to a Cpd via mle. Throws SplitError
/// when the multiset is too small or a half would be empty.
OracleSplit split_oracle(const ResponseSet& responses,
                         std::optional<std::pair<long, long>> sizes,
                         std::uint64_t seed);

/// Expected calibration error over equal-width confidence bins: bin edges
/// are left-inclusive and the last bin is closed. Throws MetricError on an
/// empty point list or out-of-range confidences.
double ece(const std::vector<CalibrationPoint>& points, int n_bins = 10);

/// Gold word under a convention. oracle may be null except for
/// oracle_majority (UsageError otherwise).
std::string gold_label(const Context& context, GoldConvention convention,
                       const Cpd& human, const OracleSplit* oracle,
                       TieBreak rule = TieBreak::kLexicographic,
                       std::uint64_t tie_seed = 0);

struct OracleConfig {
  /// Fixed half sizes; unset means (⌊N/2⌋, N − ⌊N/2⌋) per context.
  std::optional<std::pair<long, long>> sizes;
  std::uint64_t base_seed = 0;
  int resamples = 20;  // oracle-derived ECEs are averaged over this many
  int ece_bins = 10;
  TieBreak tie_break = TieBreak::kLexicographic;
  /// When set, per-context oracle TVDs are averaged over all resamples
  /// instead of using the designated (index 0) split.
  bool average_tvd_over_resamples = false;
};

/// Per-context numbers from the designated split.
struct ContextReport {
  std::string context_id;
  double tvd_model_human = 0.0;
  double tvd_oracle_oracle = 0.0;
  double tvd_model_oracle = 0.0;
  double entropy_human = 0.0;
  double entropy_model = 0.0;
  long context_length_words = 0;
  std::string model_mode;
  double model_confidence = 0.0;
  std::map<std::string, std::string> gold;    // convention name -> label
  std::map<std::string, bool> model_correct;  // convention name -> flag
};

struct EceCell {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over resamples
  int resamples = 0;
};

/// Table layout: rows = gold conventions, columns = systems
/// {"model", "human" (= oracle_b), "oracle" (= oracle_a)}.
struct AggregateReport {
  std::size_t evaluated = 0;
  std::vector<std::string> skipped_context_ids;
  std::map<std::string, double> expected_tvd;  // system -> mean TVD vs human
  std::map<std::string, std::map<std::string, EceCell>> ece;
  std::optional<std::pair<long, long>> oracle_sizes;  // unset = half split
  std::uint64_t base_seed = 0;
  int resamples = 0;
  int ece_bins = 0;
};

struct EvaluationResult {
  std::vector<ContextReport> reports;
  AggregateReport aggregate;
};

/// Space-agnostic evaluation input: the same pass serves word-level and
/// token-level analyses, so atoms are arbitrary strings here.
struct EvaluationItem {
  std::string context_id;
  std::string gold_atom;  // corpus word, or its first token in token space
  ResponseSet responses;  // human answers in the same atom space
  Cpd model;
  long context_length_words = 0;
};

/// Full evaluation pass over prepared items. `skipped` carries ids excluded
/// upstream (e.g. no model cpd); items whose responses cannot be split are
/// appended to it. Throws MetricError when nothing is evaluable.
EvaluationResult evaluate_items(const std::vector<EvaluationItem>& items,
                                const OracleConfig& config,
                                std::vector<std::string> skipped = {});

/// Word-level evaluation: pairs dataset contexts with their model cpds,
/// skipping and listing contexts that lack one.
EvaluationResult evaluate(const Dataset& dataset,
                          const std::map<std::string, Cpd>& model_cpds,
                          const OracleConfig& config);

/// Whitespace-token count; the context-length predictor.
long count_context_words(const std::string& context_text);

// Serialization (stable key order, no timestamps).
std::string context_reports_to_jsonl(const std::vector<ContextReport>& reports);
std::vector<ContextReport> context_reports_from_jsonl(std::istream& in);
std::string aggregate_report_to_json(const AggregateReport& aggregate);

}  // namespace varcal
