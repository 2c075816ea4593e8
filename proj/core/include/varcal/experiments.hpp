#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "varcal/bpe.hpp"
#include "varcal/corpus.hpp"
#include "varcal/cpd.hpp"
#include "varcal/metrics.hpp"
#include "varcal/sampler.hpp"

namespace varcal {

/// One (k, seed) cell of the artificial-improvement sweep: a random k% of
/// contexts have their model-oracle TVD replaced by the oracle-oracle TVD.
struct ImprovementResult {
  int k_percent = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> context_ids;           // sorted, all contexts
  std::vector<double> tvd_values;                 // aligned with context_ids
  std::vector<std::string> replaced_context_ids;  // sorted subset
  std::pair<long, long> oracle_sizes{0, 0};       // metadata echo
  double mean_tvd = 0.0;
};

/// For each seed one uniform permutation of the contexts is drawn; the
/// replaced set at k is its first round(k/100 · n) elements (banker's
/// rounding), so replaced sets are nested across k and the sets at k and
/// 100−k partition the contexts whenever the two rounded sizes sum to n.
/// Throws InputError when the two tvd maps cover different contexts.
std::vector<ImprovementResult> improvement_sweep(
    const std::map<std::string, double>& model_tvds,
    const std::map<std::string, double>& oracle_tvds,
    const std::vector<int>& ks, const std::vector<std::uint64_t>& seeds,
    std::pair<long, long> oracle_sizes = {0, 0});

/// One (size, seed) cell of the subsampling study.
struct SubsampleResult {
  long subsample_size = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  std::vector<std::string> context_ids;  // sorted, evaluable at every size
  std::vector<double> squared_errors;    // aligned with context_ids
};

struct SubsampleRun {
  std::vector<SubsampleResult> results;
  /// Contexts without enough non-rejected records for max(sizes), or
  /// without an oracle cpd; excluded from every cell to keep cells paired.
  std::vector<std::string> excluded_context_ids;
};

/// Re-estimates each context's model cpd from uniform without-replacement
/// subsamples of its non-rejected generations and reports the MSE of the
/// resulting TVDs (against `oracles`) relative to the full-sample TVDs.
SubsampleRun subsample_mse(
    const std::map<std::string, std::vector<GenerationRecord>>& full_records,
    const std::vector<long>& sizes, const std::vector<std::uint64_t>& seeds,
    const std::map<std::string, Cpd>& oracles);

/// Token-space evaluation: human answers and the corpus word are reduced to
/// their first BPE token (with leading space); the model token cpd is the
/// relative frequency of raw generations' first tokens. Slicing rejection
/// does not apply in token space, so all generations with nonempty text
/// contribute.
EvaluationResult token_level_eval(
    const Dataset& dataset,
    const std::map<std::string, std::vector<GenerationRecord>>& generations,
    const BpeVocab& vocab, const OracleConfig& config);

/// Same pass with precomputed model token cpds (e.g. from next-token
/// logits) instead of sampled generations.
EvaluationResult token_level_eval_with_cpds(
    const Dataset& dataset, const std::map<std::string, Cpd>& token_cpds,
    const BpeVocab& vocab, const OracleConfig& config);

// JSONL emission, one row per (k or size, seed) cell.
std::string improvement_results_to_jsonl(
    const std::vector<ImprovementResult>& results);
std::string subsample_run_to_jsonl(const SubsampleRun& run);

}  // namespace varcal
