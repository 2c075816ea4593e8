#include "varcal/report.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

HistogramData histogram(const std::vector<double>& values, int n_bins,
                        double lo, double hi) {
  if (values.empty()) throw ReportError("histogram: no values");
  if (n_bins < 1) throw ReportError("histogram: n_bins must be positive");
  if (!(lo < hi)) throw ReportError("histogram: empty range");
  HistogramData hist;
  hist.n = values.size();
  hist.lo = lo;
  hist.hi = hi;
  const double width = (hi - lo) / n_bins;
  hist.bin_edges.resize(n_bins + 1);
  for (int b = 0; b <= n_bins; ++b) hist.bin_edges[b] = lo + b * width;
  hist.bin_edges.back() = hi;  // exact upper edge
  std::vector<long> counts(n_bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) throw ReportError("histogram: non-finite value");
    int bin = static_cast<int>((v - lo) / width);
    bin = std::clamp(bin, 0, n_bins - 1);  // clamps strays, closes last bin
    ++counts[bin];
  }
  hist.densities.resize(n_bins);
  const double n = static_cast<double>(values.size());
  for (int b = 0; b < n_bins; ++b) {
    hist.densities[b] = counts[b] / (n * width);
  }
  return hist;
}

KdeCurve kde(const std::vector<double>& values,
             std::optional<double> bandwidth) {
  if (values.size() < 2) throw ReportError("kde: need at least 2 values");
  const double n = static_cast<double>(values.size());
  KdeCurve curve;
  if (bandwidth.has_value()) {
    if (!(*bandwidth > 0.0)) throw ReportError("kde: bandwidth must be > 0");
    curve.bandwidth = *bandwidth;
  } else {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / (n - 1.0));
    // Scott's rule; identical values would give bandwidth 0, so a floor
    // turns that case into a narrow peak instead of a division by zero.
    curve.bandwidth = stddev * std::pow(n, -0.2);
    if (curve.bandwidth < 1e-3) {
      curve.bandwidth = 1e-3;
      curve.bandwidth_floored = true;
    }
  }

  constexpr int kGridPoints = 512;
  constexpr double kLo = -0.1, kHi = 1.1;
  const double step = (kHi - kLo) / (kGridPoints - 1);
  const double h = curve.bandwidth;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> xs_full(kGridPoints), ys_full(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    const double x = kLo + i * step;
    double y = 0.0;
    for (double v : values) {
      const double z = (x - v) / h;
      y += std::exp(-0.5 * z * z);
    }
    xs_full[i] = x;
    ys_full[i] = norm * y;
  }
  // Stored curve: the grid points inside [0,1].
  double clipped_integral = 0.0;
  for (int i = 0; i < kGridPoints; ++i) {
    if (xs_full[i] < 0.0 || xs_full[i] > 1.0) continue;
    if (!curve.xs.empty()) {
      clipped_integral +=
          0.5 * (curve.ys.back() + ys_full[i]) * (xs_full[i] - curve.xs.back());
    }
    curve.xs.push_back(xs_full[i]);
    curve.ys.push_back(ys_full[i]);
  }
  curve.truncated_mass = 1.0 - clipped_integral;
  return curve;
}

TopkComparison topk_comparison(const Cpd& human, const Cpd& model, int k) {
  if (k < 1) throw ReportError("topk_comparison: k must be at least 1");
  auto top = [k](const Cpd& self, const Cpd& other) {
    std::vector<std::pair<std::string, double>> entries(
        self.entries().begin(), self.entries().end());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;  // the mode tie rule
              });
    if (entries.size() > static_cast<std::size_t>(k)) entries.resize(k);
    std::vector<TopkEntry> out;
    out.reserve(entries.size());
    for (auto& [word, prob] : entries) {
      out.push_back({word, prob, other.probability(word)});
    }
    return out;
  };
  TopkComparison comparison;
  comparison.k = k;
  comparison.human = top(human, model);
  comparison.model = top(model, human);
  return comparison;
}

std::string histogram_to_json(const HistogramData& hist) {
  ordered_json doc;
  doc["bin_edges"] = hist.bin_edges;
  doc["densities"] = hist.densities;
  doc["n"] = hist.n;
  doc["range"] = ordered_json::array({hist.lo, hist.hi});
  return doc.dump(2) + "\n";
}

std::string kde_to_json(const KdeCurve& curve) {
  ordered_json doc;
  doc["xs"] = curve.xs;
  doc["ys"] = curve.ys;
  doc["bandwidth"] = curve.bandwidth;
  doc["bandwidth_floored"] = curve.bandwidth_floored;
  doc["truncated_mass"] = curve.truncated_mass;
  return doc.dump(2) + "\n";
}

std::string topk_to_json(const TopkComparison& comparison) {
  ordered_json doc;
  doc["k"] = comparison.k;
  auto side = [](const std::vector<TopkEntry>& entries) {
    ordered_json arr = ordered_json::array();
    for (const auto& entry : entries) {
      ordered_json e;
      e["word"] = entry.word;
      e["p_self"] = entry.p_self;
      e["p_other"] = entry.p_other;
      arr.push_back(e);
    }
    return arr;
  };
  doc["human"] = side(comparison.human);
  doc["model"] = side(comparison.model);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// SVG rendering: fixed 640x400 canvas, no external dependencies.

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kMarginLeft = 56, kMarginRight = 16;
constexpr double kMarginTop = 32, kMarginBottom = 40;

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Frame {
  double x_lo, x_hi, y_lo, y_hi;

  double map_x(double x) const {
    return kMarginLeft +
           (x - x_lo) / (x_hi - x_lo) * (kWidth - kMarginLeft - kMarginRight);
  }
  double map_y(double y) const {
    return kHeight - kMarginBottom -
           (y - y_lo) / (y_hi - y_lo) *
               (kHeight - kMarginTop - kMarginBottom);
  }
};

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << escape_xml(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Frame& frame) {
  const double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
  const double y0 = kHeight - kMarginBottom, y1 = kMarginTop;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1
      << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0
      << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = frame.x_lo + (frame.x_hi - frame.x_lo) * i / 4.0;
    const double yv = frame.y_lo + (frame.y_hi - frame.y_lo) * i / 4.0;
    out << "<text x=\"" << frame.map_x(xv) << "\" y=\"" << y0 + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << fmt(xv) << "</text>\n"
        << "<text x=\"" << x0 - 6 << "\" y=\"" << frame.map_y(yv) + 3
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << fmt(yv) << "</text>\n";
  }
}

}  // namespace

std::string render_histogram_svg(const HistogramData& hist,
                                 const std::string& title) {
  double max_density = 0.0;
  for (double d : hist.densities) max_density = std::max(max_density, d);
  if (max_density <= 0.0) max_density = 1.0;
  Frame frame{hist.lo, hist.hi, 0.0, max_density * 1.05};
  std::ostringstream out;
  open_svg(out, title);
  draw_axes(out, frame);
  for (std::size_t b = 0; b < hist.densities.size(); ++b) {
    const double x0 = frame.map_x(hist.bin_edges[b]);
    const double x1 = frame.map_x(hist.bin_edges[b + 1]);
    const double y = frame.map_y(hist.densities[b]);
    const double base = frame.map_y(0.0);
    out << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << (x1 - x0)
        << "\" height=\"" << (base - y)
        << "\" fill=\"#4c78a8\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_kde_svg(const std::vector<KdeCurve>& curves,
                           const std::vector<std::string>& labels,
                           const std::string& title) {
  if (curves.empty()) throw ReportError("render_kde_svg: no curves");
  if (labels.size() != curves.size()) {
    throw ReportError("render_kde_svg: label count mismatch");
  }
  static const char* kColors[] = {"#4c78a8", "#f58518", "#54a24b", "#e45756",
                                  "#72b7b2", "#b279a2"};
  double max_y = 0.0;
  for (const auto& curve : curves) {
    for (double y : curve.ys) max_y = std::max(max_y, y);
  }
  if (max_y <= 0.0) max_y = 1.0;
  Frame frame{0.0, 1.0, 0.0, max_y * 1.05};
  std::ostringstream out;
  open_svg(out, title);
  draw_axes(out, frame);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curves[c].xs.size(); ++i) {
      out << fmt(frame.map_x(curves[c].xs[i])) << ','
          << fmt(frame.map_y(curves[c].ys[i])) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kMarginRight - 8 << "\" y=\""
        << kMarginTop + 14 + 14 * c
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\" fill=\""
        << color << "\">" << escape_xml(labels[c]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_topk_svg(const TopkComparison& comparison,
                            const std::string& title) {
  // Two stacked panels of horizontal paired bars.
  const auto render_panel = [](std::ostringstream& out,
                               const std::vector<TopkEntry>& entries,
                               double top, double height,
                               const std::string& label) {
    out << "<text x=\"" << kMarginLeft << "\" y=\"" << top - 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape_xml(label) << "</text>\n";
    if (entries.empty()) return;
    double max_p = 0.0;
    for (const auto& e : entries) {
      max_p = std::max({max_p, e.p_self, e.p_other});
    }
    if (max_p <= 0.0) max_p = 1.0;
    const double row_h = height / static_cast<double>(entries.size());
    const double bar_w = kWidth - kMarginLeft - kMarginRight - 90;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double y = top + i * row_h;
      const double self_w = entries[i].p_self / max_p * bar_w;
      const double other_w = entries[i].p_other / max_p * bar_w;
      out << "<text x=\"" << kMarginLeft + 84 << "\" y=\""
          << y + row_h * 0.6
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
             "font-size=\"10\">"
          << escape_xml(entries[i].word) << "</text>\n"
          << "<rect x=\"" << kMarginLeft + 90 << "\" y=\"" << y + row_h * 0.12
          << "\" width=\"" << self_w << "\" height=\"" << row_h * 0.36
          << "\" fill=\"#4c78a8\"/>\n"
          << "<rect x=\"" << kMarginLeft + 90 << "\" y=\"" << y + row_h * 0.52
          << "\" width=\"" << other_w << "\" height=\"" << row_h * 0.36
          << "\" fill=\"#f58518\"/>\n";
    }
  };
  std::ostringstream out;
  open_svg(out, title);
  const double panel_h = (kHeight - kMarginTop - kMarginBottom - 24) / 2.0;
  render_panel(out, comparison.human, kMarginTop + 16, panel_h,
               "human top-k (blue: human, orange: model)");
  render_panel(out, comparison.model, kMarginTop + 40 + panel_h, panel_h,
               "model top-k (blue: model, orange: human)");
  out << "</svg>\n";
  return out.str();
}

}  // namespace varcal
