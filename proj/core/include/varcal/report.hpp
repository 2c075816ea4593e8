#pragma once

#include <optional>
#include <string>
#include <vector>

#include "varcal/cpd.hpp"

namespace varcal {

/// Density-normalized histogram: sum(density * width) == 1.
struct HistogramData {
  std::vector<double> bin_edges;  // n_bins + 1, ascending
  std::vector<double> densities;  // n_bins, >= 0
  std::size_t n = 0;
  double lo = 0.0;
  double hi = 1.0;
};

/// Equal-width bins over [lo, hi] (defaults [0,1]; TVD-difference plots pass
/// a wider range). Values outside the range are clamped into the edge bins;
/// the last bin is closed. Throws ReportError on empty input or lo >= hi.
HistogramData histogram(const std::vector<double>& values, int n_bins = 20,
                        double lo = 0.0, double hi = 1.0);

struct KdeCurve {
  std::vector<double> xs;  // grid restricted to [0,1]
  std::vector<double> ys;  // densities >= 0
  double bandwidth = 0.0;
  bool bandwidth_floored = false;  // zero-variance input hit the 1e-3 floor
  double truncated_mass = 0.0;     // kernel mass outside the stored grid
};

/// Gaussian KDE evaluated on a 512-point grid spanning [-0.1, 1.1]; the
/// stored curve keeps the points inside [0,1] and reports the mass cut off
/// by that clipping. Bandwidth defaults to Scott's rule (sample stddev x
/// n^(-1/5)) with a 1e-3 floor. Throws ReportError on fewer than 2 values.
KdeCurve kde(const std::vector<double>& values,
             std::optional<double> bandwidth = std::nullopt);

struct TopkEntry {
  std::string word;
  double p_self = 0.0;   // probability under the side's own cpd
  double p_other = 0.0;  // the other side's probability for the same word
};

struct TopkComparison {
  std::vector<TopkEntry> human;  // human's top-k, paired with model probs
  std::vector<TopkEntry> model;  // model's top-k, paired with human probs
  int k = 0;
};

/// Top-k words per side by probability (ties toward the lexicographically
/// smaller word, the mode tie rule); k larger than a support returns the
/// full support. Throws ReportError when k < 1.
TopkComparison topk_comparison(const Cpd& human, const Cpd& model, int k = 15);

// JSON emission (stable key order).
std::string histogram_to_json(const HistogramData& hist);
std::string kde_to_json(const KdeCurve& curve);
std::string topk_to_json(const TopkComparison& comparison);

// Minimal self-contained SVG renderings.
std::string render_histogram_svg(const HistogramData& hist,
                                 const std::string& title);
std::string render_kde_svg(const std::vector<KdeCurve>& curves,
                           const std::vector<std::string>& labels,
                           const std::string& title);
std::string render_topk_svg(const TopkComparison& comparison,
                            const std::string& title);

}  // namespace varcal
