#include "varcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "varcal/errors.hpp"

namespace {

using varcal::CalibrationPoint;
using varcal::Cpd;
using varcal::Dataset;
using varcal::GoldConvention;
using varcal::OracleConfig;
using varcal::ResponseSet;

ResponseSet make_responses(const std::string& id,
                           std::vector<std::pair<std::string, long>> counts) {
  ResponseSet rs;
  rs.context_id = id;
  rs.responses = std::move(counts);  // already sorted by word in the tests
  return rs;
}

Dataset make_eval_dataset() {
  Dataset d;
  auto add = [&](const std::string& id, const std::string& passage, int wn,
                 const std::string& text, const std::string& word,
                 std::vector<std::pair<std::string, long>> resp) {
    d.contexts.push_back({id, passage, wn, text, word});
    d.response_sets.emplace(id, make_responses(id, std::move(resp)));
  };
  add("1_1", "1", 1, "The quick brown", "fox", {{"dog", 4}, {"fox", 6}});
  add("1_2", "1", 2, "It was a", "dark", {{"dark", 5}, {"stormy", 5}});
  add("2_1", "2", 1, "Never gonna give", "you", {{"you", 10}});
  return d;
}

std::map<std::string, Cpd> make_model_cpds() {
  std::map<std::string, Cpd> cpds;
  cpds.emplace("1_1", Cpd::from_entries({{"fox", 0.5}, {"dog", 0.5}}));
  cpds.emplace("1_2", Cpd::from_entries({{"dark", 0.9}, {"light", 0.1}}));
  return cpds;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("default oracle sizes halve the multiset") {
  CHECK(varcal::default_oracle_sizes(5) == std::pair<long, long>{2, 3});
  CHECK(varcal::default_oracle_sizes(4) == std::pair<long, long>{2, 2});
  CHECK(varcal::default_oracle_sizes(1) == std::pair<long, long>{0, 1});
}

TEST_CASE("split_oracle partitions the multiset deterministically") {
  const ResponseSet rs = make_responses("c", {{"a", 3}, {"b", 2}});
  const auto split = varcal::split_oracle(rs, std::nullopt, 7);
  CHECK(split.sizes == std::pair<long, long>{2, 3});
  CHECK(split.seed == 7);
  CHECK(split.context_id == "c");

  // Both halves together reproduce the original multiset exactly.
  std::map<std::string, long> combined;
  for (const auto& [word, p] : split.oracle_a.entries()) {
    combined[word] += std::lround(p * static_cast<double>(split.sizes.first));
  }
  for (const auto& [word, p] : split.oracle_b.entries()) {
    combined[word] += std::lround(p * static_cast<double>(split.sizes.second));
  }
  CHECK(combined == std::map<std::string, long>{{"a", 3}, {"b", 2}});

  // Same seed, same halves; the draw is reproducible.
  const auto again = varcal::split_oracle(rs, std::nullopt, 7);
  CHECK(again.oracle_a == split.oracle_a);
  CHECK(again.oracle_b == split.oracle_b);
}

TEST_CASE("split_oracle honors explicit sizes") {
  const ResponseSet rs = make_responses("c", {{"a", 3}, {"b", 2}});
  const auto split = varcal::split_oracle(rs, std::pair<long, long>{1, 4}, 3);
  CHECK(split.sizes == std::pair<long, long>{1, 4});
  CHECK(split.oracle_a.support_size() == 1);  // one draw, point mass

  CHECK_THROWS_AS(
      varcal::split_oracle(rs, std::pair<long, long>{3, 3}, 3),
      varcal::SplitError);
  CHECK_THROWS_AS(
      varcal::split_oracle(rs, std::pair<long, long>{0, 5}, 3),
      varcal::SplitError);
  const ResponseSet tiny = make_responses("t", {{"a", 1}});
  CHECK_THROWS_AS(varcal::split_oracle(tiny, std::nullopt, 3),
                  varcal::SplitError);
}

TEST_CASE("ece single closed bin") {
  const std::vector<CalibrationPoint> points = {{0.8, true}, {0.8, false}};
  CHECK(varcal::ece(points, 1) == std::abs(0.8 - 0.5));
}

TEST_CASE("ece respects left-inclusive bin edges") {
  // 0.09 lands in bin 0, 0.11 in bin 1 at 10 bins.
  const std::vector<CalibrationPoint> points = {{0.09, false}, {0.11, true}};
  CHECK(varcal::ece(points, 10) == doctest::Approx(0.5 * 0.09 + 0.5 * 0.89));
  // In a single bin the two points pool instead.
  CHECK(varcal::ece(points, 1) == doctest::Approx(std::abs(0.1 - 0.5)));
  // Confidence 1.0 stays inside the last bin.
  CHECK_NOTHROW(varcal::ece({{1.0, true}}, 10));
  CHECK(varcal::ece({{1.0, true}}, 10) == doctest::Approx(0.0));
}

TEST_CASE("ece is invariant to point order") {
  std::vector<CalibrationPoint> points = {
      {0.3, false}, {0.9, true}, {0.55, true}, {0.55, false}, {0.1, false}};
  const double forward = varcal::ece(points, 10);
  std::reverse(points.begin(), points.end());
  CHECK(varcal::ece(points, 10) == doctest::Approx(forward));
}

TEST_CASE("ece input validation") {
  CHECK_THROWS_AS(varcal::ece({}, 10), varcal::MetricError);
  CHECK_THROWS_AS(varcal::ece({{0.5, true}}, 0), varcal::MetricError);
  CHECK_THROWS_AS(varcal::ece({{1.5, true}}, 10), varcal::MetricError);
  CHECK_THROWS_AS(varcal::ece({{-0.1, true}}, 10), varcal::MetricError);
  CHECK_THROWS_AS(varcal::ece({{std::nan(""), true}}, 10),
                  varcal::MetricError);
}

TEST_CASE("gold_label by convention") {
  const varcal::Context ctx{"c", "1", 1, "The quick", "fox"};
  const Cpd human = Cpd::from_entries({{"dog", 0.6}, {"fox", 0.4}});
  CHECK(varcal::gold_label(ctx, GoldConvention::kOriginalCorpusWord, human,
                           nullptr) == "fox");
  CHECK(varcal::gold_label(ctx, GoldConvention::kHumanMajority, human,
                           nullptr) == "dog");
  CHECK_THROWS_AS(varcal::gold_label(ctx, GoldConvention::kOracleMajority,
                                     human, nullptr),
                  varcal::UsageError);

  const ResponseSet rs = make_responses("c", {{"cat", 4}, {"dog", 2}});
  const auto split = varcal::split_oracle(rs, std::nullopt, 1);
  const std::string gold = varcal::gold_label(
      ctx, GoldConvention::kOracleMajority, human, &split);
  CHECK((gold == "cat" || gold == "dog"));
  CHECK(gold == varcal::mode(split.oracle_a).word);
}

TEST_CASE("gold convention names round trip") {
  for (auto convention : varcal::kAllGoldConventions) {
    CHECK(varcal::gold_convention_from_name(
              varcal::gold_convention_name(convention)) == convention);
  }
  CHECK_THROWS_AS(varcal::gold_convention_from_name("nope"),
                  varcal::InputError);
}

TEST_CASE("count_context_words counts whitespace tokens") {
  CHECK(varcal::count_context_words("the quick brown") == 3);
  CHECK(varcal::count_context_words("") == 0);
  CHECK(varcal::count_context_words("  a  b ") == 2);
}

TEST_CASE("evaluate pairs contexts with model cpds and skips the rest") {
  const Dataset d = make_eval_dataset();
  OracleConfig config;
  config.base_seed = 42;
  config.resamples = 3;

  const auto result = varcal::evaluate(d, make_model_cpds(), config);
  CHECK(result.aggregate.evaluated == 2);
  CHECK(result.aggregate.skipped_context_ids ==
        std::vector<std::string>{"2_1"});
  REQUIRE(result.reports.size() == 2);

  const auto& r = result.reports[0];
  CHECK(r.context_id == "1_1");
  CHECK(r.tvd_model_human == doctest::Approx(0.1));
  CHECK(r.entropy_human ==
        doctest::Approx(varcal::entropy(
            Cpd::from_entries({{"dog", 0.4}, {"fox", 0.6}}))));
  CHECK(r.entropy_model == doctest::Approx(std::log(2.0)));
  CHECK(r.context_length_words == 3);
  CHECK(r.model_mode == "dog");  // lexicographic tie-break at 0.5/0.5
  CHECK(r.model_confidence == doctest::Approx(0.5));
  CHECK(r.gold.at("original") == "fox");
  CHECK(r.model_correct.at("original") == false);
  CHECK(r.gold.at("human_majority") == "fox");
  CHECK(r.tvd_oracle_oracle >= 0.0);
  CHECK(r.tvd_model_oracle >= 0.0);

  // Mean model TVD over the two evaluated contexts: (0.1 + 0.5) / 2.
  CHECK(result.aggregate.expected_tvd.at("model") == doctest::Approx(0.3));
  CHECK(result.aggregate.expected_tvd.at("human") == 0.0);
  CHECK(result.aggregate.expected_tvd.at("oracle") >= 0.0);

  // Full ECE table: three conventions, three systems each.
  for (const char* convention :
       {"original", "human_majority", "oracle_majority"}) {
    const auto& row = result.aggregate.ece.at(convention);
    for (const char* system : {"model", "human", "oracle"}) {
      const auto& cell = row.at(system);
      CHECK(cell.resamples == 3);
      CHECK(cell.mean >= 0.0);
      CHECK(cell.stddev >= 0.0);
    }
  }
  // The model's original-gold calibration does not depend on the split.
  CHECK(result.aggregate.ece.at("original").at("model").stddev ==
        doctest::Approx(0.0));

  CHECK_FALSE(result.aggregate.oracle_sizes.has_value());
  CHECK(result.aggregate.base_seed == 42);
  CHECK(result.aggregate.resamples == 3);
  CHECK(result.aggregate.ece_bins == 10);
}

TEST_CASE("evaluate is deterministic") {
  const Dataset d = make_eval_dataset();
  OracleConfig config;
  config.base_seed = 9;
  config.resamples = 5;
  const auto a = varcal::evaluate(d, make_model_cpds(), config);
  const auto b = varcal::evaluate(d, make_model_cpds(), config);
  CHECK(varcal::aggregate_report_to_json(a.aggregate) ==
        varcal::aggregate_report_to_json(b.aggregate));
  CHECK(varcal::context_reports_to_jsonl(a.reports) ==
        varcal::context_reports_to_jsonl(b.reports));
}

TEST_CASE("evaluate appends unsplittable contexts to skipped") {
  Dataset d;
  d.contexts.push_back({"1_1", "1", 1, "The quick brown", "fox"});
  d.response_sets.emplace("1_1",
                          make_responses("1_1", {{"dog", 4}, {"fox", 6}}));
  d.contexts.push_back({"1_2", "1", 2, "Only one", "answer"});
  d.response_sets.emplace("1_2", make_responses("1_2", {{"answer", 1}}));

  std::map<std::string, Cpd> cpds;
  cpds.emplace("1_1", Cpd::from_entries({{"fox", 1.0}}));
  cpds.emplace("1_2", Cpd::from_entries({{"answer", 1.0}}));

  const auto result = varcal::evaluate(d, cpds, OracleConfig{});
  CHECK(result.aggregate.evaluated == 1);
  CHECK(result.aggregate.skipped_context_ids ==
        std::vector<std::string>{"1_2"});
}

TEST_CASE("evaluate throws when nothing is evaluable") {
  Dataset d;
  d.contexts.push_back({"1_1", "1", 1, "Only one", "answer"});
  d.response_sets.emplace("1_1", make_responses("1_1", {{"answer", 1}}));
  std::map<std::string, Cpd> cpds;
  cpds.emplace("1_1", Cpd::from_entries({{"answer", 1.0}}));
  CHECK_THROWS_AS(varcal::evaluate(d, cpds, OracleConfig{}),
                  varcal::MetricError);

  OracleConfig bad;
  bad.resamples = 0;
  CHECK_THROWS_AS(
      varcal::evaluate(make_eval_dataset(), make_model_cpds(), bad),
      varcal::MetricError);
}

TEST_CASE("context reports serialize and parse back") {
  const auto result =
      varcal::evaluate(make_eval_dataset(), make_model_cpds(), OracleConfig{});
  const std::string jsonl = varcal::context_reports_to_jsonl(result.reports);

  std::istringstream in(jsonl);
  const auto back = varcal::context_reports_from_jsonl(in);
  REQUIRE(back.size() == result.reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].context_id == result.reports[i].context_id);
    CHECK(back[i].tvd_model_human ==
          doctest::Approx(result.reports[i].tvd_model_human));
    CHECK(back[i].tvd_oracle_oracle ==
          doctest::Approx(result.reports[i].tvd_oracle_oracle));
    CHECK(back[i].tvd_model_oracle ==
          doctest::Approx(result.reports[i].tvd_model_oracle));
    CHECK(back[i].model_mode == result.reports[i].model_mode);
    CHECK(back[i].gold == result.reports[i].gold);
    CHECK(back[i].model_correct == result.reports[i].model_correct);
    CHECK(back[i].context_length_words ==
          result.reports[i].context_length_words);
  }

  // Stable row key order.
  const std::string first_line = jsonl.substr(0, jsonl.find('\n'));
  const auto row = nlohmann::ordered_json::parse(first_line);
  std::vector<std::string> keys;
  for (const auto& [key, value] : row.items()) keys.push_back(key);
  CHECK(keys == std::vector<std::string>{
                    "context_id", "tvd_model_human", "tvd_oracle_oracle",
                    "tvd_model_oracle", "entropy_human", "entropy_model",
                    "context_length_words", "model_mode", "model_confidence",
                    "gold", "model_correct"});
}

TEST_CASE("aggregate report JSON shape") {
  OracleConfig config;
  config.base_seed = 11;
  config.resamples = 2;
  const auto result =
      varcal::evaluate(make_eval_dataset(), make_model_cpds(), config);
  const std::string text =
      varcal::aggregate_report_to_json(result.aggregate);
  CHECK(text.back() == '\n');

  const auto doc = nlohmann::json::parse(text);
  CHECK(doc.at("evaluated") == 2);
  CHECK(doc.at("skipped_context_ids").is_array());
  CHECK(doc.at("expected_tvd").contains("model"));
  CHECK(doc.at("expected_tvd").contains("human"));
  CHECK(doc.at("expected_tvd").contains("oracle"));
  CHECK(doc.at("ece").contains("original"));
  CHECK(doc.at("ece").at("original").at("model").contains("mean"));
  CHECK(doc.at("ece").at("original").at("model").contains("stddev"));
  CHECK(doc.at("ece").at("original").at("model").at("resamples") == 2);
  CHECK(doc.at("oracle").at("sizes").is_null());
  CHECK(doc.at("oracle").at("base_seed") == 11);
  CHECK(doc.at("oracle").at("resamples") == 2);
  CHECK(doc.at("oracle").at("ece_bins") == 10);
}

}  // TEST_SUITE
