#include "varcal/ard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kAlphaCap = 1e12;
constexpr double kBetaCap = 1e12;
constexpr double kBetaFloor = 1e-12;
constexpr double kTiny = 1e-300;
constexpr double kConstantStd = 1e-12;

bool is_feature_tag(const std::string& tag) {
  return std::find(kFeatureTags.begin(), kFeatureTags.end(), tag) !=
         kFeatureTags.end();
}

}  // namespace

FeatureMatrix build_features(
    const std::vector<ContextReport>& reports,
    const std::map<std::string, std::string>& last_word_tags) {
  FeatureMatrix m;
  m.feature_names = {"human_entropy", "model_entropy", "tvd_between_oracles",
                     "context_length"};
  for (auto tag : kFeatureTags) m.feature_names.emplace_back(tag);
  const std::size_t n_numeric = 4;
  const std::size_t n_features = m.feature_names.size();

  struct Kept {
    const ContextReport* report;
    std::size_t tag_index;
  };
  std::vector<Kept> kept;
  for (const auto& report : reports) {
    auto tag_it = last_word_tags.find(report.context_id);
    if (tag_it == last_word_tags.end() || !is_feature_tag(tag_it->second)) {
      m.dropped_context_ids.push_back(report.context_id);
      continue;
    }
    const double numerics[n_numeric] = {
        report.entropy_human, report.entropy_model, report.tvd_oracle_oracle,
        static_cast<double>(report.context_length_words)};
    bool finite = std::isfinite(report.tvd_model_oracle);
    for (double v : numerics) finite = finite && std::isfinite(v);
    if (!finite) {
      m.dropped_context_ids.push_back(report.context_id);
      continue;
    }
    const std::size_t tag_index =
        n_numeric + static_cast<std::size_t>(
                        std::find(kFeatureTags.begin(), kFeatureTags.end(),
                                  tag_it->second) -
                        kFeatureTags.begin());
    kept.push_back({&report, tag_index});
  }

  const std::size_t n = kept.size();
  m.feature_means.assign(n_features, 0.0);
  m.feature_stds.assign(n_features, 1.0);
  m.constant_features.assign(n_features, false);
  if (n == 0) return m;

  m.rows.assign(n, std::vector<double>(n_features, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = *kept[i].report;
    m.context_ids.push_back(r.context_id);
    m.rows[i][0] = r.entropy_human;
    m.rows[i][1] = r.entropy_model;
    m.rows[i][2] = r.tvd_oracle_oracle;
    m.rows[i][3] = static_cast<double>(r.context_length_words);
    m.rows[i][kept[i].tag_index] = 1.0;
    m.targets.push_back(r.tvd_model_oracle);
  }

  // Standardize the numeric block; one-hots stay as they are.
  for (std::size_t j = 0; j < n_numeric; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += m.rows[i][j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = m.rows[i][j] - mean;
      var += d * d;
    }
    const double std = std::sqrt(var / static_cast<double>(n));
    m.feature_means[j] = mean;
    if (std < kConstantStd) {
      m.constant_features[j] = true;
      m.feature_stds[j] = 0.0;
      for (std::size_t i = 0; i < n; ++i) m.rows[i][j] = 0.0;
    } else {
      m.feature_stds[j] = std;
      for (std::size_t i = 0; i < n; ++i) {
        m.rows[i][j] = (m.rows[i][j] - mean) / std;
      }
    }
  }
  return m;
}

ArdFit fit_ard(const std::vector<std::vector<double>>& x,
               const std::vector<double>& y, const ArdOptions& options) {
  const std::size_t n = x.size();
  if (n < 2) throw InputError("fit_ard: need at least 2 rows");
  if (y.size() != n) throw InputError("fit_ard: row/target count mismatch");
  const std::size_t d = x[0].size();
  if (d < 1) throw InputError("fit_ard: need at least 1 feature");
  for (const auto& row : x) {
    if (row.size() != d) throw InputError("fit_ard: ragged feature rows");
  }

  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd yv(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X(i, j) = x[i][j];
    yv(i) = y[i];
  }
  if (!X.allFinite() || !yv.allFinite()) {
    throw InputError("fit_ard: non-finite inputs");
  }

  ArdFit fit;
  fit.interval_level = options.interval_level;
  fit.target_mean = yv.mean();
  yv.array() -= fit.target_mean;

  // Identically-zero columns carry no signal and would break the gamma
  // update, so they are pruned before the loop starts.
  std::vector<std::size_t> active;
  fit.pruned.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    if (X.col(j).cwiseAbs().sum() == 0.0) {
      fit.pruned[j] = true;
    } else {
      active.push_back(j);
    }
  }

  const double y_var = yv.squaredNorm() / static_cast<double>(n);
  double beta = options.init_beta.value_or(
      y_var > kBetaFloor ? 1.0 / y_var : kBetaCap);
  beta = std::clamp(beta, kBetaFloor, kBetaCap);
  std::vector<double> alpha(d, options.init_alpha);

  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int iterations = 0;
  bool converged = !options.update_hyperparameters;

  auto solve_posterior = [&](const std::vector<std::size_t>& act)
      -> std::pair<Eigen::VectorXd, Eigen::MatrixXd> {
    const std::size_t k = act.size();
    Eigen::MatrixXd Xa(n, k);
    for (std::size_t j = 0; j < k; ++j) Xa.col(j) = X.col(act[j]);
    Eigen::MatrixXd A = beta * (Xa.transpose() * Xa);
    for (std::size_t j = 0; j < k; ++j) A(j, j) += alpha[act[j]];
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    Eigen::MatrixXd S =
        ldlt.solve(Eigen::MatrixXd::Identity(static_cast<long>(k),
                                             static_cast<long>(k)));
    Eigen::VectorXd m = beta * (S * (Xa.transpose() * yv));
    return {std::move(m), std::move(S)};
  };

  for (int iter = 1; iter <= options.max_iters && !active.empty(); ++iter) {
    iterations = iter;
    auto [m, S] = solve_posterior(active);
    if (!m.allFinite() || !S.allFinite()) {
      throw NumericalError("fit_ard: non-finite posterior at iteration " +
                           std::to_string(iter));
    }
    mu = m;
    sigma = S;
    if (!options.update_hyperparameters) break;

    const std::size_t k = active.size();
    Eigen::MatrixXd Xa(n, k);
    for (std::size_t j = 0; j < k; ++j) Xa.col(j) = X.col(active[j]);
    double gamma_sum = 0.0;
    std::vector<double> alpha_new(k);
    for (std::size_t j = 0; j < k; ++j) {
      double gamma = 1.0 - alpha[active[j]] * sigma(j, j);
      gamma = std::clamp(gamma, 0.0, 1.0);
      gamma_sum += gamma;
      alpha_new[j] =
          std::min(gamma / std::max(mu(j) * mu(j), kTiny), kAlphaCap);
    }
    const double resid = (yv - Xa * mu).squaredNorm();
    double beta_new = (static_cast<double>(n) - gamma_sum) /
                      std::max(resid, kTiny);
    beta_new = std::clamp(beta_new, kBetaFloor, kBetaCap);
    if (!std::isfinite(beta_new)) {
      throw NumericalError("fit_ard: non-finite noise precision at iteration " +
                           std::to_string(iter));
    }

    // Convergence is judged on the hyperparameters that survive pruning.
    double max_delta = std::abs(std::log(beta_new) - std::log(beta));
    std::vector<std::size_t> next_active;
    for (std::size_t j = 0; j < k; ++j) {
      if (alpha_new[j] > options.prune_threshold) {
        fit.pruned[active[j]] = true;
        continue;
      }
      max_delta = std::max(
          max_delta, std::abs(std::log(alpha_new[j]) -
                              std::log(alpha[active[j]])));
      next_active.push_back(active[j]);
    }
    const bool pruned_any = next_active.size() != active.size();
    for (std::size_t j = 0; j < k; ++j) alpha[active[j]] = alpha_new[j];
    beta = beta_new;
    active = std::move(next_active);
    if (!pruned_any && max_delta < options.tol) {
      converged = true;
      break;
    }
    if (active.empty()) {
      converged = true;
      break;
    }
  }

  // Final posterior under the final hyperparameters.
  fit.weights.assign(d, 0.0);
  fit.weight_variances.assign(d, 0.0);
  fit.credible_intervals.assign(d, {0.0, 0.0});
  if (!active.empty()) {
    auto [m, S] = solve_posterior(active);
    if (!m.allFinite() || !S.allFinite()) {
      throw NumericalError("fit_ard: non-finite final posterior");
    }
    const boost::math::normal_distribution<double> unit_normal(0.0, 1.0);
    const double z = boost::math::quantile(
        unit_normal, 0.5 + options.interval_level / 2.0);
    for (std::size_t j = 0; j < active.size(); ++j) {
      const double variance = std::max(S(j, j), 0.0);
      const double half_width = z * std::sqrt(variance);
      fit.weights[active[j]] = m(j);
      fit.weight_variances[active[j]] = variance;
      fit.credible_intervals[active[j]] = {m(j) - half_width,
                                           m(j) + half_width};
    }
  }
  fit.noise_precision = beta;
  fit.iterations_run = iterations;
  fit.converged = converged || active.empty();
  return fit;
}

ArdFit fit_ard(const FeatureMatrix& features, const ArdOptions& options) {
  return fit_ard(features.rows, features.targets, options);
}

std::string feature_matrix_to_csv(const FeatureMatrix& features) {
  std::ostringstream out;
  out << "context_id";
  for (const auto& name : features.feature_names) out << ',' << name;
  out << ",target\n";
  out.precision(17);
  for (std::size_t i = 0; i < features.rows.size(); ++i) {
    out << features.context_ids[i];
    for (double v : features.rows[i]) out << ',' << v;
    out << ',' << features.targets[i] << '\n';
  }
  return out.str();
}

std::string ard_fit_to_json(const ArdFit& fit,
                            const std::vector<std::string>& feature_names) {
  if (feature_names.size() != fit.weights.size()) {
    throw InputError("ard_fit_to_json: feature name count mismatch");
  }
  ordered_json doc;
  ordered_json weights;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    ordered_json entry;
    entry["weight"] = fit.weights[j];
    entry["variance"] = fit.weight_variances[j];
    entry["interval"] = ordered_json::array({fit.credible_intervals[j].first,
                                             fit.credible_intervals[j].second});
    entry["pruned"] = static_cast<bool>(fit.pruned[j]);
    weights[feature_names[j]] = entry;
  }
  doc["weights"] = weights;
  doc["noise_precision"] = fit.noise_precision;
  doc["iterations_run"] = fit.iterations_run;
  doc["converged"] = fit.converged;
  doc["target_mean"] = fit.target_mean;
  doc["interval_level"] = fit.interval_level;
  return doc.dump(2) + "\n";
}

}  // namespace varcal
