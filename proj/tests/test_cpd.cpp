#include "varcal/cpd.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "varcal/errors.hpp"

namespace {

using varcal::Cpd;
using varcal::WordCounts;

Cpd make_cpd(Cpd::Entries entries) { return Cpd::from_entries(std::move(entries)); }

}  // namespace

TEST_SUITE("cpd") {

TEST_CASE("from_entries accepts a valid distribution") {
  const Cpd p = make_cpd({{"a", 0.5}, {"b", 0.5}});
  CHECK(p.support_size() == 2);
  CHECK(p.probability("a") == doctest::Approx(0.5));
  CHECK(p.probability("missing") == 0.0);
  CHECK_FALSE(p.empty());
}

TEST_CASE("from_entries drops exact zeros") {
  const Cpd p = make_cpd({{"a", 1.0}, {"b", 0.0}});
  CHECK(p.support_size() == 1);
  CHECK(p.probability("b") == 0.0);
}

TEST_CASE("from_entries rejects invalid probabilities") {
  CHECK_THROWS_AS(make_cpd({{"a", -0.1}, {"b", 1.1}}), varcal::IntegrityError);
  CHECK_THROWS_AS(make_cpd({{"a", std::nan("")}}), varcal::IntegrityError);
  CHECK_THROWS_AS(make_cpd({{"a", 0.4}, {"b", 0.4}}), varcal::IntegrityError);
  CHECK_THROWS_AS(make_cpd({{"a", 0.0}}), varcal::IntegrityError);
  CHECK_THROWS_AS(make_cpd({}), varcal::IntegrityError);
}

TEST_CASE("from_entries tolerates rounding-level mass error") {
  CHECK_NOTHROW(make_cpd({{"a", 1.0 / 3.0}, {"b", 1.0 / 3.0}, {"c", 1.0 / 3.0}}));
  CHECK_NOTHROW(make_cpd({{"a", 1.0 + 5e-10}}));
}

TEST_CASE("normalize_word folds case and strips surrounding punctuation") {
  CHECK(varcal::normalize_word("The") == "the");
  CHECK(varcal::normalize_word("  word, ") == "word");
  CHECK(varcal::normalize_word("don't") == "don't");
  CHECK(varcal::normalize_word("well-known") == "well-known");
  CHECK(varcal::normalize_word("...") == "");
  CHECK(varcal::normalize_word("") == "");
  CHECK(varcal::normalize_word("7th") == "7th");
}

TEST_CASE("normalize_word maps typographic variants to ASCII") {
  // Curly quotes strip like straight quotes; curly apostrophes survive
  // between word characters.
  CHECK(varcal::normalize_word("“Hello”") == "hello");
  CHECK(varcal::normalize_word("don’t") == "don't");
  CHECK(varcal::normalize_word("’tis") == "tis");
}

TEST_CASE("normalize_word folds Latin-1 letters") {
  CHECK(varcal::normalize_word("CAFÉ") == "café");
}

TEST_CASE("normalize_word is idempotent") {
  const std::vector<std::string> samples = {
      "The", " word, ", "don't", "well-known", "CAFÉ", "a.b", "7th"};
  for (const auto& s : samples) {
    const std::string once = varcal::normalize_word(s);
    CHECK(varcal::normalize_word(once) == once);
  }
}

TEST_CASE("first_word needs a boundary unless the end counts as one") {
  CHECK(varcal::first_word("hello world", false) == "hello");
  CHECK_FALSE(varcal::first_word("hello", false).has_value());
  CHECK(varcal::first_word("hello", true) == "hello");
  CHECK(varcal::first_word("hello.", false) == "hello");
  CHECK(varcal::first_word("  the", true) == "the");
  CHECK_FALSE(varcal::first_word("...", true).has_value());
  CHECK_FALSE(varcal::first_word("", true).has_value());
  CHECK_FALSE(varcal::first_word("   ", true).has_value());
}

TEST_CASE("first_word keeps internal apostrophes and hyphens only") {
  CHECK(varcal::first_word("don't stop", false) == "don't");
  CHECK(varcal::first_word("rock-n-roll!", false) == "rock-n-roll");
  // A trailing hyphen is a boundary, not part of the word.
  CHECK(varcal::first_word("wait- what", false) == "wait");
  CHECK(varcal::first_word("Hello there", false) == "hello");
}

TEST_CASE("word counts accumulate and reject non-positive counts") {
  WordCounts wc;
  wc.add("a");
  wc.add("a", 2);
  wc.add("b", 1);
  CHECK(wc.total == 4);
  CHECK(wc.counts.at("a") == 3);
  CHECK_THROWS_AS(wc.add("c", 0), varcal::IntegrityError);
  CHECK_THROWS_AS(wc.add("c", -1), varcal::IntegrityError);
}

TEST_CASE("mle is the relative frequency") {
  WordCounts wc;
  wc.add("a", 2);
  wc.add("b", 1);
  const Cpd p = varcal::mle(wc);
  CHECK(p.probability("a") == doctest::Approx(2.0 / 3.0));
  CHECK(p.probability("b") == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(varcal::mle(WordCounts{}), varcal::EstimationError);
}

TEST_CASE("tvd hand values") {
  const Cpd p = make_cpd({{"a", 0.7}, {"b", 0.3}});
  const Cpd q = make_cpd({{"a", 0.3}, {"b", 0.7}});
  CHECK(varcal::tvd(p, q) == doctest::Approx(0.4));
  CHECK(varcal::tvd(p, p) == doctest::Approx(0.0));

  const Cpd r = make_cpd({{"a", 0.5}, {"b", 0.5}});
  const Cpd s = make_cpd({{"a", 0.1}, {"c", 0.9}});
  CHECK(varcal::tvd(r, s) == doctest::Approx(0.9));

  const Cpd u = make_cpd({{"a", 1.0}});
  const Cpd v = make_cpd({{"b", 1.0}});
  CHECK(varcal::tvd(u, v) == doctest::Approx(1.0));
}

TEST_CASE("tvd is symmetric and bounded") {
  const Cpd p = make_cpd({{"a", 0.2}, {"b", 0.5}, {"c", 0.3}});
  const Cpd q = make_cpd({{"b", 0.1}, {"d", 0.9}});
  const double d = varcal::tvd(p, q);
  CHECK(d == doctest::Approx(varcal::tvd(q, p)));
  CHECK(d >= 0.0);
  CHECK(d <= 1.0);
}

TEST_CASE("entropy in nats") {
  CHECK(varcal::entropy(make_cpd({{"a", 1.0}})) == doctest::Approx(0.0));
  CHECK(varcal::entropy(make_cpd({{"a", 0.5}, {"b", 0.5}})) ==
        doctest::Approx(std::log(2.0)));
  CHECK(varcal::entropy(make_cpd(
            {{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}})) ==
        doctest::Approx(std::log(4.0)));
}

TEST_CASE("mode picks the maximum and reports ties") {
  const auto unique = varcal::mode(make_cpd({{"a", 0.2}, {"b", 0.8}}));
  CHECK(unique.word == "b");
  CHECK(unique.probability == doctest::Approx(0.8));
  CHECK_FALSE(unique.tied);

  const Cpd tied = make_cpd({{"b", 0.4}, {"a", 0.4}, {"c", 0.2}});
  const auto lex = varcal::mode(tied);
  CHECK(lex.word == "a");  // lexicographic default
  CHECK(lex.tied);

  const auto seeded = varcal::mode(tied, varcal::TieBreak::kSeededRandom, 7);
  CHECK((seeded.word == "a" || seeded.word == "b"));
  CHECK(seeded.word ==
        varcal::mode(tied, varcal::TieBreak::kSeededRandom, 7).word);
  CHECK_THROWS_AS(varcal::mode(Cpd{}), varcal::EstimationError);
}

}  // TEST_SUITE
