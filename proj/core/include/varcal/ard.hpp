#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varcal/metrics.hpp"

namespace varcal {

/// Tag categories usable as regression predictors (the universal tagset
/// minus the catch-all X; X-tagged rows count as missing a predictor).
inline constexpr std::array<std::string_view, 11> kFeatureTags = {
    "PUNCT", "ADJ", "ADP", "ADV", "CONJ", "DET",
    "NOUN",  "NUM", "PRON", "PRT", "VERB"};

/// Design matrix in standardized units: four numeric predictors (zero mean,
/// unit variance over the kept rows) followed by eleven unstandardized
/// one-hot tag indicators.
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<std::string> context_ids;           // kept rows
  std::vector<std::vector<double>> rows;          // X, row-major
  std::vector<double> targets;                    // y = tvd(model, oracle_a)
  std::vector<double> feature_means;              // identity for one-hots
  std::vector<double> feature_stds;               // 0 marks a constant column
  std::vector<bool> constant_features;            // flagged, column zeroed
  std::vector<std::string> dropped_context_ids;   // missing predictors
};

/// Assembles rows from per-context reports plus the tag of each context's
/// last word. Rows lacking a tag, tagged outside kFeatureTags, or carrying
/// non-finite numerics are dropped and listed.
FeatureMatrix build_features(
    const std::vector<ContextReport>& reports,
    const std::map<std::string, std::string>& last_word_tags);

struct ArdOptions {
  int max_iters = 500;
  double tol = 1e-6;  // max |Δ log hyperparameter| for convergence
  double interval_level = 0.95;
  double prune_threshold = 1e6;  // alpha above this zeroes the feature
  /// When false, alpha/beta stay at their initial values and only the
  /// posterior is computed (the fixed-precision ridge equivalence path).
  bool update_hyperparameters = true;
  double init_alpha = 1.0;
  std::optional<double> init_beta;  // default: 1 / var(y)
};

struct ArdFit {
  std::vector<double> weights;           // pruned features are exactly 0
  std::vector<double> weight_variances;  // posterior marginals; pruned -> 0
  std::vector<std::pair<double, double>> credible_intervals;
  std::vector<bool> pruned;
  double noise_precision = 0.0;  // beta
  int iterations_run = 0;
  bool converged = false;
  double target_mean = 0.0;  // y was centered by this before fitting
  double interval_level = 0.95;
};

/// Evidence-maximization ARD (MacKay fixed-point updates) with zero-mean
/// Gaussian weight priors, one precision per feature. The target is
/// centered internally; identically-zero columns are pruned at entry.
/// Throws InputError on shape problems and NumericalError (with the
/// iteration index) when the loop produces non-finite values.
ArdFit fit_ard(const std::vector<std::vector<double>>& x,
               const std::vector<double>& y, const ArdOptions& options = {});

ArdFit fit_ard(const FeatureMatrix& features, const ArdOptions& options = {});

// Feature matrix CSV (header = context_id, features..., target) and
// ArdFit JSON keyed by feature name.
std::string feature_matrix_to_csv(const FeatureMatrix& features);
std::string ard_fit_to_json(const ArdFit& fit,
                            const std::vector<std::string>& feature_names);

}  // namespace varcal
