#include "varcal/bpe.hpp"

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "varcal/errors.hpp"

namespace {

using varcal::BpeVocab;
using varcal::MergeRule;

BpeVocab toy_vocab() {
  // Enough merges to assemble "Ġthe" and "hell".
  return BpeVocab::from_merges({{"h", "e"},
                                {"l", "l"},
                                {"he", "ll"},
                                {"Ġ", "t"},
                                {"Ġt", "he"}});
}

}  // namespace

TEST_SUITE("bpe") {

TEST_CASE("standard alphabet covers every byte") {
  const auto& alphabet = BpeVocab::standard_alphabet();
  for (int b = 0; b < 256; ++b) {
    CHECK(alphabet[static_cast<std::size_t>(b)].has_value());
  }
  CHECK(*alphabet['a'] == "a");
  CHECK(*alphabet['!'] == "!");
  // Space remaps to U+0120.
  CHECK(*alphabet[' '] == "Ġ");
  // The DEL byte is the next remapped codepoint after the controls.
  CHECK(*alphabet[0x7F] == "ġ");
}

TEST_CASE("encode applies merges lowest rank first") {
  const auto vocab = toy_vocab();
  CHECK(vocab.encode("hello") ==
        std::vector<std::string>{"hell", "o"});
  CHECK(vocab.encode("h") == std::vector<std::string>{"h"});
  CHECK(vocab.encode("") == std::vector<std::string>{});
}

TEST_CASE("a merge applies to all adjacent occurrences at once") {
  const auto vocab = BpeVocab::from_merges({{"a", "b"}});
  CHECK(vocab.encode("ababab") ==
        std::vector<std::string>{"ab", "ab", "ab"});
  // Overlaps resolve left to right.
  const auto aa = BpeVocab::from_merges({{"a", "a"}});
  CHECK(aa.encode("aaa") == std::vector<std::string>{"aa", "a"});
}

TEST_CASE("merge validation") {
  CHECK_THROWS_AS(BpeVocab::from_merges({{"a", "b"}, {"a", "b"}}),
                  varcal::VocabError);
  std::map<std::string, long> ids = {{"a", 0}, {"b", 1}};
  CHECK_THROWS_AS(BpeVocab::from_merges({{"a", "b"}}, ids),
                  varcal::VocabError);  // product "ab" missing
  ids["ab"] = 2;
  CHECK_NOTHROW(BpeVocab::from_merges({{"a", "b"}}, ids));
}

TEST_CASE("partial alphabets reject unmapped bytes") {
  BpeVocab::Alphabet alphabet;  // everything unset
  alphabet['a'] = "a";
  const auto vocab =
      BpeVocab::from_merges_with_alphabet({}, alphabet);
  CHECK(vocab.encode("aa") == std::vector<std::string>{"a", "a"});
  CHECK_THROWS_AS(vocab.encode("ax"), varcal::VocabError);
}

TEST_CASE("load reads the two-file format") {
  std::istringstream merges(
      "#version: 0.2\n"
      "h e\n"
      "l l\n"
      "he ll\n");
  const auto vocab = BpeVocab::load(merges);
  CHECK(vocab.merge_count() == 3);
  CHECK(vocab.encode("hello") == std::vector<std::string>{"hell", "o"});
  CHECK_FALSE(vocab.token_ids().has_value());

  std::istringstream merges2("h e\n");
  std::istringstream ids("{\"h\": 0, \"e\": 1, \"he\": 2}");
  const auto with_vocab = BpeVocab::load(merges2, &ids);
  REQUIRE(with_vocab.token_ids().has_value());
  CHECK(with_vocab.token_ids()->at("he") == 2);

  std::istringstream bad("h e extra\n");
  CHECK_THROWS_AS(BpeVocab::load(bad), varcal::FormatError);

  std::istringstream merges3("h e\n");
  std::istringstream bad_json("[1,2]");
  CHECK_THROWS_AS(BpeVocab::load(merges3, &bad_json), varcal::FormatError);
}

TEST_CASE("first_pretoken follows the byte-level pretokenizer") {
  CHECK(varcal::first_pretoken("") == "");
  CHECK(varcal::first_pretoken("hello world") == "hello");
  CHECK(varcal::first_pretoken(" hello world") == " hello");
  CHECK(varcal::first_pretoken("don't") == "don");
  CHECK(varcal::first_pretoken("'s more") == "'s");
  CHECK(varcal::first_pretoken("'q more") == "'");
  CHECK(varcal::first_pretoken("!! hi") == "!!");
  CHECK(varcal::first_pretoken(" !") == " !");
  CHECK(varcal::first_pretoken("42nd") == "42");
  // A multi-space run keeps its last space for the following pretoken.
  CHECK(varcal::first_pretoken("  hi") == " ");
  CHECK(varcal::first_pretoken("   ") == "   ");
}

TEST_CASE("bpe_first_token encodes the leading-space form") {
  const auto vocab = toy_vocab();
  CHECK(varcal::bpe_first_token(" the", vocab) == "Ġthe");
  CHECK(varcal::bpe_first_token(" hello", vocab) == "Ġ");
  CHECK(varcal::bpe_first_token("the", vocab) == "t");
}

TEST_CASE("first_token_of_text slices raw model output") {
  const auto vocab = toy_vocab();
  CHECK(varcal::first_token_of_text("hello there", vocab) == "hell");
  CHECK(varcal::first_token_of_text(" the dog", vocab) == "Ġthe");
  CHECK(varcal::first_token_of_text("", vocab) == "");
  // Multi-byte UTF-8 passes through the byte alphabet without error.
  CHECK_FALSE(varcal::first_token_of_text("été chaud", vocab)
                  .empty());
}

}  // TEST_SUITE
