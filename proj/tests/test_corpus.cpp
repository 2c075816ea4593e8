#include "varcal/corpus.hpp"

#include <sstream>
#include <string>

#include "doctest.h"
#include "varcal/digest.hpp"
#include "varcal/errors.hpp"

namespace {

using varcal::CsvColumnMap;
using varcal::Dataset;

CsvColumnMap provo_columns() {
  CsvColumnMap map;
  map.passage = "Text_ID";
  map.word_num = "Word_Number";
  map.context = "Text";
  map.target = "Word";
  map.response = "Response";
  return map;
}

Dataset parse_csv(const std::string& csv) {
  std::istringstream in(csv);
  return varcal::parse_provo_csv(in, provo_columns());
}

const char* kSmallCsv =
    "Text_ID,Word_Number,Text,Word,Response\n"
    "1,3,The quick brown,fox,fox\n"
    "1,3,The quick brown,fox,dog\n"
    "1,3,The quick brown,fox,fox\n"
    "2,2,It was,a, the\n"
    "2,2,It was,a,\n"
    "2,2,It was,a,two words\n";

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("parse_provo_csv aggregates one row per answer") {
  const Dataset d = parse_csv(kSmallCsv);
  REQUIRE(d.contexts.size() == 2);

  CHECK(d.contexts[0].context_id == "1_3");
  CHECK(d.contexts[0].passage_id == "1");
  CHECK(d.contexts[0].word_number == 3);
  CHECK(d.contexts[0].context_text == "The quick brown");
  CHECK(d.contexts[0].corpus_word == "fox");

  const auto& r1 = d.response_sets.at("1_3");
  REQUIRE(r1.responses.size() == 2);
  CHECK(r1.responses[0] == std::pair<std::string, long>{"dog", 1});
  CHECK(r1.responses[1] == std::pair<std::string, long>{"fox", 2});
  CHECK(r1.total() == 3);

  // " the" trims, "two words" truncates to its first word, "" drops.
  const auto& r2 = d.response_sets.at("2_2");
  REQUIRE(r2.responses.size() == 2);
  CHECK(r2.responses[0] == std::pair<std::string, long>{"the", 1});
  CHECK(r2.responses[1] == std::pair<std::string, long>{"two", 1});
}

TEST_CASE("ingestion counters") {
  const Dataset d = parse_csv(kSmallCsv);
  CHECK(d.ingestion.rows_read == 6);
  CHECK(d.ingestion.responses_ingested == 5);
  CHECK(d.ingestion.empty_responses_dropped == 1);
  CHECK(d.ingestion.multiword_responses_truncated == 1);
}

TEST_CASE("provenance digest covers the raw bytes") {
  const Dataset d = parse_csv(kSmallCsv);
  CHECK(d.provenance.source_digest == varcal::sha256_hex(kSmallCsv));
}

TEST_CASE("missing mapped column raises SchemaError") {
  CHECK_THROWS_AS(parse_csv("Text_ID,Word_Number,Text,Word\n1,1,a,b\n"),
                  varcal::SchemaError);
}

TEST_CASE("conflicting duplicate contexts raise IntegrityError") {
  CHECK_THROWS_AS(
      parse_csv("Text_ID,Word_Number,Text,Word,Response\n"
                "1,3,The quick brown,fox,fox\n"
                "1,3,The quick RED,fox,dog\n"),
      varcal::IntegrityError);
  CHECK_THROWS_AS(
      parse_csv("Text_ID,Word_Number,Text,Word,Response\n"
                "1,3,The quick brown,fox,fox\n"
                "1,3,The quick brown,cat,dog\n"),
      varcal::IntegrityError);
}

TEST_CASE("unusable corpus word raises IntegrityError") {
  CHECK_THROWS_AS(parse_csv("Text_ID,Word_Number,Text,Word,Response\n"
                            "1,3,The quick brown,...,fox\n"),
                  varcal::IntegrityError);
}

TEST_CASE("contexts whose every answer dropped are omitted") {
  const Dataset d = parse_csv(
      "Text_ID,Word_Number,Text,Word,Response\n"
      "1,3,The quick brown,fox,fox\n"
      "2,2,It was,a,\n"
      "2,2,It was,a,!!\n");
  CHECK(d.contexts.size() == 1);
  CHECK(d.contexts[0].context_id == "1_3");
  CHECK(d.response_sets.count("2_2") == 0);
}

TEST_CASE("zero usable contexts raises EmptyDatasetError") {
  CHECK_THROWS_AS(parse_csv("Text_ID,Word_Number,Text,Word,Response\n"
                            "1,3,The quick brown,fox,\n"),
                  varcal::EmptyDatasetError);
  CHECK_THROWS_AS(parse_csv(""), varcal::EmptyDatasetError);
}

TEST_CASE("quoted fields with embedded delimiters") {
  const Dataset d = parse_csv(
      "Text_ID,Word_Number,Text,Word,Response\n"
      "1,2,\"One, two\",three,\"three\"\n");
  REQUIRE(d.contexts.size() == 1);
  CHECK(d.contexts[0].context_text == "One, two");
  CHECK(d.response_sets.at("1_2").responses[0].first == "three");
}

TEST_CASE("count column weighs answers") {
  CsvColumnMap map = provo_columns();
  map.count = "N";
  std::istringstream in(
      "Text_ID,Word_Number,Text,Word,Response,N\n"
      "1,2,The quick,fox,fox,3\n"
      "1,2,The quick,fox,dog,2\n");
  const Dataset d = varcal::parse_provo_csv(in, map);
  const auto& rs = d.response_sets.at("1_2");
  CHECK(rs.total() == 5);
  CHECK(rs.responses[1] == std::pair<std::string, long>{"fox", 3});

  std::istringstream bad(
      "Text_ID,Word_Number,Text,Word,Response,N\n"
      "1,2,The quick,fox,fox,0\n");
  CHECK_THROWS_AS(varcal::parse_provo_csv(bad, map), varcal::ParseError);
}

TEST_CASE("canonical emit/parse round trip") {
  const Dataset d = parse_csv(kSmallCsv);
  const std::string jsonl = varcal::emit_canonical_jsonl(d);

  std::istringstream in(jsonl);
  const Dataset back = varcal::parse_canonical_jsonl(in);
  REQUIRE(back.contexts.size() == d.contexts.size());
  for (std::size_t i = 0; i < d.contexts.size(); ++i) {
    CHECK(back.contexts[i].context_id == d.contexts[i].context_id);
    CHECK(back.contexts[i].passage_id == d.contexts[i].passage_id);
    CHECK(back.contexts[i].word_number == d.contexts[i].word_number);
    CHECK(back.contexts[i].context_text == d.contexts[i].context_text);
    CHECK(back.contexts[i].corpus_word == d.contexts[i].corpus_word);
    const auto& a = d.response_sets.at(d.contexts[i].context_id).responses;
    const auto& b = back.response_sets.at(d.contexts[i].context_id).responses;
    CHECK(a == b);
  }

  // emit is a fixpoint over parse for canonical files.
  CHECK(varcal::emit_canonical_jsonl(back) == jsonl);
}

TEST_CASE("canonical parser reports malformed lines") {
  std::istringstream bad_json("{not json\n");
  CHECK_THROWS_AS(varcal::parse_canonical_jsonl(bad_json), varcal::ParseError);

  std::istringstream missing_key("{\"context_id\":\"1_1\"}\n");
  CHECK_THROWS_AS(varcal::parse_canonical_jsonl(missing_key),
                  varcal::ParseError);

  std::istringstream empty("\n\n");
  CHECK_THROWS_AS(varcal::parse_canonical_jsonl(empty),
                  varcal::EmptyDatasetError);
}

TEST_CASE("canonical parser enforces invariants") {
  // Unnormalized response word.
  std::istringstream bad(
      "{\"context_id\":\"1_1\",\"passage_id\":\"1\",\"word_number\":1,"
      "\"context_text\":\"The\",\"corpus_word\":\"fox\","
      "\"responses\":[{\"word\":\"Fox\",\"count\":1}]}\n");
  CHECK_THROWS_AS(varcal::parse_canonical_jsonl(bad), varcal::IntegrityError);
}

TEST_CASE("context order compares passage ids numerically when possible") {
  varcal::Context a{"2_1", "2", 1, "t", "w"};
  varcal::Context b{"10_1", "10", 1, "t", "w"};
  CHECK(varcal::context_order_less(a, b));       // 2 < 10 numerically
  CHECK_FALSE(varcal::context_order_less(b, a));

  varcal::Context c{"x_1", "x", 1, "t", "w"};
  varcal::Context d{"y_1", "y", 1, "t", "w"};
  CHECK(varcal::context_order_less(c, d));  // lexicographic fallback

  varcal::Context e{"2_1", "2", 1, "t", "w"};
  varcal::Context f{"2_5", "2", 5, "t", "w"};
  CHECK(varcal::context_order_less(e, f));  // then word_number
}

TEST_CASE("dataset sorted by numeric passage order") {
  const Dataset d = parse_csv(
      "Text_ID,Word_Number,Text,Word,Response\n"
      "10,1,Later passage,word,word\n"
      "2,5,Earlier passage,word,word\n"
      "2,1,Earlier passage start,word,word\n");
  REQUIRE(d.contexts.size() == 3);
  CHECK(d.contexts[0].context_id == "2_1");
  CHECK(d.contexts[1].context_id == "2_5");
  CHECK(d.contexts[2].context_id == "10_1");
}

TEST_CASE("validate_dataset summarizes and flags breaches") {
  Dataset d = parse_csv(kSmallCsv);
  auto report = varcal::validate_dataset(d);
  CHECK(report.ok());
  CHECK(report.context_count == 2);
  CHECK(report.response_set_count == 2);
  CHECK(report.min_responses == 2);
  CHECK(report.max_responses == 3);
  CHECK(report.median_responses == doctest::Approx(2.5));

  d.contexts[0].corpus_word = "NOT normalized";
  auto flagged = varcal::validate_dataset(d);
  CHECK_FALSE(flagged.ok());
  CHECK(flagged.breaches.size() == 1);
}

TEST_CASE("find_context looks up by id") {
  const Dataset d = parse_csv(kSmallCsv);
  REQUIRE(d.find_context("1_3") != nullptr);
  CHECK(d.find_context("1_3")->corpus_word == "fox");
  CHECK(d.find_context("9_9") == nullptr);
}

}  // TEST_SUITE
