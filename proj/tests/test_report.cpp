#include "varcal/report.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "varcal/errors.hpp"

TEST_SUITE("report") {

TEST_CASE("histogram bins and densities") {
  const auto hist = varcal::histogram({0.05, 0.15, 0.25, 0.35}, 2);
  REQUIRE(hist.bin_edges.size() == 3);
  CHECK(hist.bin_edges[0] == doctest::Approx(0.0));
  CHECK(hist.bin_edges[1] == doctest::Approx(0.5));
  CHECK(hist.bin_edges[2] == doctest::Approx(1.0));
  // All four values land in the first bin: density 4/(4*0.5) = 2.
  CHECK(hist.densities[0] == doctest::Approx(2.0));
  CHECK(hist.densities[1] == doctest::Approx(0.0));
  CHECK(hist.n == 4);

  double mass = 0.0;
  for (std::size_t i = 0; i < hist.densities.size(); ++i) {
    mass += hist.densities[i] * (hist.bin_edges[i + 1] - hist.bin_edges[i]);
  }
  CHECK(mass == doctest::Approx(1.0));
}

TEST_CASE("histogram clamps strays and closes the last bin") {
  const auto hist = varcal::histogram({-0.5, 1.5, 1.0, 0.99}, 2);
  // -0.5 -> first bin; 1.5, 1.0, and 0.99 -> last bin.
  CHECK(hist.densities[0] == doctest::Approx(0.5));
  CHECK(hist.densities[1] == doctest::Approx(1.5));
}

TEST_CASE("histogram honors a custom range") {
  const auto hist = varcal::histogram({-0.3, 0.3}, 4, -0.4, 0.4);
  CHECK(hist.lo == doctest::Approx(-0.4));
  CHECK(hist.hi == doctest::Approx(0.4));
  CHECK(hist.bin_edges.front() == doctest::Approx(-0.4));
  CHECK(hist.bin_edges.back() == doctest::Approx(0.4));
  CHECK(hist.densities[0] == doctest::Approx(2.5));  // 1/(2*0.2)
  CHECK(hist.densities[3] == doctest::Approx(2.5));
}

TEST_CASE("histogram validation") {
  CHECK_THROWS_AS(varcal::histogram({}, 2), varcal::ReportError);
  CHECK_THROWS_AS(varcal::histogram({0.5}, 0), varcal::ReportError);
  CHECK_THROWS_AS(varcal::histogram({0.5}, 2, 1.0, 1.0), varcal::ReportError);
  CHECK_THROWS_AS(varcal::histogram({std::nan("")}, 2), varcal::ReportError);
}

TEST_CASE("kde uses Scott's rule and integrates to about one") {
  const std::vector<double> values = {0.2, 0.4, 0.6, 0.8};
  const auto curve = varcal::kde(values);
  // Sample std sqrt(0.2/3), n^(-1/5) = 4^(-0.2).
  const double scott = std::sqrt(0.2 / 3.0) * std::pow(4.0, -0.2);
  CHECK(curve.bandwidth == doctest::Approx(scott).epsilon(1e-9));
  CHECK_FALSE(curve.bandwidth_floored);
  REQUIRE(!curve.xs.empty());
  REQUIRE(curve.xs.size() == curve.ys.size());
  for (double x : curve.xs) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
  for (double y : curve.ys) CHECK(y >= 0.0);

  // Trapezoid over the stored grid recovers the non-truncated mass.
  double integral = 0.0;
  for (std::size_t i = 1; i < curve.xs.size(); ++i) {
    integral += 0.5 * (curve.ys[i] + curve.ys[i - 1]) *
                (curve.xs[i] - curve.xs[i - 1]);
  }
  CHECK(integral + curve.truncated_mass == doctest::Approx(1.0).epsilon(0.02));
  CHECK(curve.truncated_mass >= 0.0);
}

TEST_CASE("kde floors the bandwidth for constant input") {
  const auto curve = varcal::kde({0.5, 0.5, 0.5});
  CHECK(curve.bandwidth == doctest::Approx(1e-3));
  CHECK(curve.bandwidth_floored);
}

TEST_CASE("kde validation and explicit bandwidth") {
  CHECK_THROWS_AS(varcal::kde({0.5}), varcal::ReportError);
  CHECK_THROWS_AS(varcal::kde({0.2, 0.4}, 0.0), varcal::ReportError);
  CHECK_THROWS_AS(varcal::kde({0.2, 0.4}, -1.0), varcal::ReportError);
  const auto curve = varcal::kde({0.2, 0.4}, 0.25);
  CHECK(curve.bandwidth == doctest::Approx(0.25));
  CHECK_FALSE(curve.bandwidth_floored);
}

TEST_CASE("topk_comparison pairs each side's top words") {
  const auto human = varcal::Cpd::from_entries(
      {{"fox", 0.5}, {"dog", 0.3}, {"cat", 0.2}});
  const auto model = varcal::Cpd::from_entries({{"dog", 0.9}, {"owl", 0.1}});
  const auto cmp = varcal::topk_comparison(human, model, 2);
  CHECK(cmp.k == 2);
  REQUIRE(cmp.human.size() == 2);
  CHECK(cmp.human[0].word == "fox");
  CHECK(cmp.human[0].p_self == doctest::Approx(0.5));
  CHECK(cmp.human[0].p_other == doctest::Approx(0.0));
  CHECK(cmp.human[1].word == "dog");
  CHECK(cmp.human[1].p_other == doctest::Approx(0.9));
  CHECK(cmp.model[0].word == "dog");
  CHECK(cmp.model[0].p_other == doctest::Approx(0.3));

  // Ties break toward the lexicographically smaller word.
  const auto tied = varcal::Cpd::from_entries({{"b", 0.5}, {"a", 0.5}});
  const auto tie_cmp = varcal::topk_comparison(tied, tied, 1);
  CHECK(tie_cmp.human[0].word == "a");

  // k beyond the support returns the whole support.
  const auto full = varcal::topk_comparison(human, model, 99);
  CHECK(full.human.size() == 3);
  CHECK(full.model.size() == 2);

  CHECK_THROWS_AS(varcal::topk_comparison(human, model, 0),
                  varcal::ReportError);
}

TEST_CASE("JSON serializers keep stable keys") {
  const auto hist = varcal::histogram({0.25, 0.75}, 2);
  const auto hist_doc = nlohmann::json::parse(varcal::histogram_to_json(hist));
  CHECK(hist_doc.at("bin_edges").size() == 3);
  CHECK(hist_doc.at("densities").size() == 2);
  CHECK(hist_doc.at("n") == 2);
  CHECK(hist_doc.at("range") == nlohmann::json::array({0.0, 1.0}));

  const auto curve = varcal::kde({0.2, 0.8});
  const auto kde_doc = nlohmann::json::parse(varcal::kde_to_json(curve));
  CHECK(kde_doc.contains("xs"));
  CHECK(kde_doc.contains("ys"));
  CHECK(kde_doc.contains("bandwidth"));
  CHECK(kde_doc.contains("bandwidth_floored"));
  CHECK(kde_doc.contains("truncated_mass"));

  const auto cmp = varcal::topk_comparison(
      varcal::Cpd::from_entries({{"a", 1.0}}),
      varcal::Cpd::from_entries({{"b", 1.0}}), 1);
  const auto topk_doc = nlohmann::json::parse(varcal::topk_to_json(cmp));
  CHECK(topk_doc.at("k") == 1);
  CHECK(topk_doc.at("human")[0].at("word") == "a");
  CHECK(topk_doc.at("human")[0].at("p_self") == 1.0);
  CHECK(topk_doc.at("human")[0].at("p_other") == 0.0);
  CHECK(topk_doc.at("model")[0].at("word") == "b");
}

TEST_CASE("SVG renderers emit self-contained markup") {
  const auto hist = varcal::histogram({0.1, 0.2, 0.7}, 4);
  const std::string svg =
      varcal::render_histogram_svg(hist, "a<b & \"q\"");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.rfind("</svg>") != std::string::npos);
  CHECK(svg.find("a&lt;b &amp; &quot;q&quot;") != std::string::npos);
  CHECK(svg.find("a<b") == std::string::npos);

  const auto curve = varcal::kde({0.2, 0.4, 0.6});
  const std::string kde_svg =
      varcal::render_kde_svg({curve}, {"model"}, "densities");
  CHECK(kde_svg.find("<svg") != std::string::npos);
  CHECK(kde_svg.find("model") != std::string::npos);

  const auto cmp = varcal::topk_comparison(
      varcal::Cpd::from_entries({{"fox", 1.0}}),
      varcal::Cpd::from_entries({{"fox", 1.0}}), 1);
  const std::string topk_svg = varcal::render_topk_svg(cmp, "top words");
  CHECK(topk_svg.find("<svg") != std::string::npos);
  CHECK(topk_svg.find("fox") != std::string::npos);
}

}  // TEST_SUITE
