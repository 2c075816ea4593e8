#include "varcal/sampler.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "varcal/errors.hpp"

namespace {

using varcal::CandidateOrigin;
using varcal::CandidateSources;
using varcal::GenerationRecord;
using varcal::PromptMode;

GenerationRecord make_record(const std::string& context_id,
                             const std::string& raw_text, int index = 0) {
  GenerationRecord rec;
  rec.context_id = context_id;
  rec.model_id = "m";
  rec.sample_index = index;
  rec.raw_text = raw_text;
  rec.sliced_word = varcal::slice_first_word(raw_text);
  rec.rejected = !rec.sliced_word.has_value();
  return rec;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("slice_first_word rejects runs without a boundary") {
  CHECK(varcal::slice_first_word("fox jumped") == "fox");
  CHECK(varcal::slice_first_word("fox.") == "fox");
  CHECK(varcal::slice_first_word("Fox\n") == "fox");
  CHECK_FALSE(varcal::slice_first_word("fox").has_value());
  CHECK_FALSE(varcal::slice_first_word("").has_value());
  CHECK_FALSE(varcal::slice_first_word("   ").has_value());
  CHECK_FALSE(varcal::slice_first_word("\n\nthe").has_value());
  CHECK_FALSE(varcal::slice_first_word("!?").has_value());
}

TEST_CASE("mc_estimate counts only non-rejected records") {
  std::vector<GenerationRecord> records = {
      make_record("c", "fox jumped"), make_record("c", "fox ran"),
      make_record("c", "dog barked"), make_record("c", "truncat")};
  CHECK(records[3].rejected);
  const auto cpd = varcal::mc_estimate(records);
  CHECK(cpd.probability("fox") == doctest::Approx(2.0 / 3.0));
  CHECK(cpd.probability("dog") == doctest::Approx(1.0 / 3.0));

  std::vector<GenerationRecord> all_rejected = {make_record("c", "xx"),
                                                make_record("c", "")};
  CHECK_THROWS_AS(varcal::mc_estimate(all_rejected), varcal::EstimationError);
}

TEST_CASE("build_candidate_pool normalizes, dedups, first origin wins") {
  CandidateSources sources;
  sources.unbiased_samples = {"Fox", "dog"};
  sources.nucleus_samples = {"fox", "cat"};
  sources.greedy_word = "dog";
  sources.corpus_word = "wolf";
  sources.human_words = {"cat", "bird", "..."};

  const auto pool = varcal::build_candidate_pool(sources);
  REQUIRE(pool.size() == 5);  // fox,dog,cat,wolf,bird; "..." is unusable
  // Output is sorted by word.
  CHECK(pool[0].first == "bird");
  CHECK(pool[0].second == CandidateOrigin::kHumanWord);
  CHECK(pool[1].first == "cat");
  CHECK(pool[1].second == CandidateOrigin::kNucleusSample);
  CHECK(pool[2].first == "dog");
  CHECK(pool[2].second == CandidateOrigin::kUnbiasedSample);
  CHECK(pool[3].first == "fox");
  CHECK(pool[3].second == CandidateOrigin::kUnbiasedSample);
  CHECK(pool[4].first == "wolf");
  CHECK(pool[4].second == CandidateOrigin::kCorpusWord);
}

TEST_CASE("candidate origin names") {
  CHECK(varcal::candidate_origin_name(CandidateOrigin::kUnbiasedSample) ==
        "unbiased_sample");
  CHECK(varcal::candidate_origin_name(CandidateOrigin::kGreedy) == "greedy");
}

TEST_CASE("ReplayScorer parses and looks up scores") {
  std::istringstream in(
      "{\"context_id\":\"c1\",\"word\":\"fox\",\"log_joint\":-1.5}\n"
      "{\"context_id\":\"c1\",\"word\":\"dog\",\"log_joint\":-2.5}\n");
  varcal::ReplayScorer scorer(in);
  varcal::Context ctx{"c1", "1", 1, "the quick", "fox"};
  CHECK(scorer.log_joint(ctx, "fox") == doctest::Approx(-1.5));
  CHECK_FALSE(scorer.log_joint(ctx, "missing").has_value());

  std::istringstream bad("{oops\n");
  CHECK_THROWS_AS(varcal::ReplayScorer{bad}, varcal::ParseError);

  std::istringstream missing("{\"context_id\":\"c1\",\"word\":\"fox\"}\n");
  CHECK_THROWS_AS(varcal::ReplayScorer{missing}, varcal::SchemaError);
}

TEST_CASE("score_candidates validates and reports missing words") {
  std::istringstream in(
      "{\"context_id\":\"c1\",\"word\":\"fox\",\"log_joint\":-1.0}\n");
  varcal::ReplayScorer scorer(in);
  varcal::Context ctx{"c1", "1", 1, "the quick", "fox"};

  const auto scored =
      varcal::score_candidates(ctx, {{"fox", CandidateOrigin::kCorpusWord}},
                               scorer);
  REQUIRE(scored.size() == 1);
  CHECK(scored[0].word == "fox");
  CHECK(scored[0].log_joint == doctest::Approx(-1.0));
  CHECK(scored[0].origin == CandidateOrigin::kCorpusWord);

  try {
    varcal::score_candidates(ctx,
                             {{"fox", CandidateOrigin::kCorpusWord},
                              {"owl", CandidateOrigin::kHumanWord}},
                             scorer);
    FAIL("expected MissingScoreError");
  } catch (const varcal::MissingScoreError& e) {
    CHECK(std::string(e.what()).find("\"owl\"") != std::string::npos);
  }

  std::istringstream positive(
      "{\"context_id\":\"c1\",\"word\":\"fox\",\"log_joint\":0.5}\n");
  varcal::ReplayScorer bad(positive);
  CHECK_THROWS_AS(varcal::score_candidates(
                      ctx, {{"fox", CandidateOrigin::kCorpusWord}}, bad),
                  varcal::ScoringError);
}

TEST_CASE("biased_estimate renormalizes over the candidate support") {
  std::vector<varcal::ScoredCandidate> candidates = {
      {"a", std::log(0.2), CandidateOrigin::kUnbiasedSample},
      {"b", std::log(0.1), CandidateOrigin::kHumanWord}};
  const auto cpd = varcal::biased_estimate(candidates);
  CHECK(cpd.probability("a") == doctest::Approx(2.0 / 3.0));
  CHECK(cpd.probability("b") == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("biased_estimate is invariant to a constant log shift") {
  std::vector<varcal::ScoredCandidate> base = {
      {"a", -1.0, CandidateOrigin::kUnbiasedSample},
      {"b", -2.0, CandidateOrigin::kUnbiasedSample},
      {"c", -3.5, CandidateOrigin::kUnbiasedSample}};
  std::vector<varcal::ScoredCandidate> shifted = base;
  for (auto& cand : shifted) cand.log_joint -= 100.0;
  const auto p = varcal::biased_estimate(base);
  const auto q = varcal::biased_estimate(shifted);
  for (const auto& [word, prob] : p.entries()) {
    CHECK(q.probability(word) == doctest::Approx(prob));
  }
}

TEST_CASE("biased_estimate input validation") {
  CHECK_THROWS_AS(varcal::biased_estimate({}), varcal::EstimationError);
  CHECK_THROWS_AS(
      varcal::biased_estimate(
          {{"a", -1.0, CandidateOrigin::kUnbiasedSample},
           {"a", -2.0, CandidateOrigin::kGreedy}}),
      varcal::InputError);
  CHECK_THROWS_AS(
      varcal::biased_estimate(
          {{"a", std::nan(""), CandidateOrigin::kUnbiasedSample}}),
      varcal::ScoringError);
}

TEST_CASE("generations JSONL round trip") {
  GenerationRecord kept = make_record("c1", "fox jumped", 0);
  kept.temperature = 0.7;
  kept.prompt_mode = PromptMode::kChatIndependent;
  kept.seed = 42;
  GenerationRecord rejected = make_record("c1", "truncat", 1);

  std::ostringstream out;
  std::vector<GenerationRecord> records = {kept, rejected};
  varcal::write_generations_jsonl(out, records);

  std::istringstream in(out.str());
  const auto back = varcal::read_generations_jsonl(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].context_id == "c1");
  CHECK(back[0].sliced_word == "fox");
  CHECK(back[0].temperature == doctest::Approx(0.7));
  CHECK(back[0].prompt_mode == PromptMode::kChatIndependent);
  CHECK(back[0].seed == 42);
  CHECK_FALSE(back[0].rejected);
  CHECK(back[1].rejected);
  CHECK_FALSE(back[1].sliced_word.has_value());
  CHECK_FALSE(back[1].seed.has_value());
}

TEST_CASE("generations reader rejects inconsistent rows") {
  // rejected=true yet sliced_word present.
  std::istringstream inconsistent(
      "{\"context_id\":\"c\",\"model_id\":\"m\",\"sample_index\":0,"
      "\"raw_text\":\"fox \",\"sliced_word\":\"fox\",\"rejected\":true,"
      "\"temperature\":1.0,\"prompt_mode\":\"completion\",\"seed\":null}\n");
  CHECK_THROWS_AS(varcal::read_generations_jsonl(inconsistent),
                  varcal::IntegrityError);

  std::istringstream missing("{\"context_id\":\"c\"}\n");
  CHECK_THROWS_AS(varcal::read_generations_jsonl(missing),
                  varcal::SchemaError);

  std::istringstream unknown_mode(
      "{\"context_id\":\"c\",\"model_id\":\"m\",\"sample_index\":0,"
      "\"raw_text\":\"fox \",\"sliced_word\":\"fox\",\"rejected\":false,"
      "\"temperature\":1.0,\"prompt_mode\":\"mystery\",\"seed\":null}\n");
  CHECK_THROWS_AS(varcal::read_generations_jsonl(unknown_mode),
                  varcal::InputError);
}

TEST_CASE("prompt mode names round trip") {
  for (auto mode : {PromptMode::kCompletion, PromptMode::kChatIndependent,
                    PromptMode::kChatDiverse}) {
    CHECK(varcal::prompt_mode_from_name(varcal::prompt_mode_name(mode)) ==
          mode);
  }
  CHECK_THROWS_AS(varcal::prompt_mode_from_name("nope"), varcal::InputError);
}

TEST_CASE("group_by_context preserves in-context order") {
  std::vector<GenerationRecord> records = {
      make_record("b", "one two", 0), make_record("a", "three four", 0),
      make_record("b", "five six", 1)};
  const auto grouped = varcal::group_by_context(std::move(records));
  REQUIRE(grouped.size() == 2);
  REQUIRE(grouped.at("b").size() == 2);
  CHECK(grouped.at("b")[0].sample_index == 0);
  CHECK(grouped.at("b")[1].sample_index == 1);
  CHECK(grouped.at("a")[0].raw_text == "three four");
}

}  // TEST_SUITE
