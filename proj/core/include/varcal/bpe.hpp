#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace varcal {

struct MergeRule {
  std::string left;
  std::string right;
};

/// Byte-level BPE vocabulary: an ordered merge list over a byte→symbol
/// alphabet. Tokens are represented in alphabet form (e.g. "Ġrun" for
/// " run"), matching the standard merges/vocabulary file contents.
class BpeVocab {
 public:
  /// byte value -> printable symbol; unset entries make encode throw
  /// VocabError for inputs containing that byte.
  using Alphabet = std::array<std::optional<std::string>, 256>;

  /// The standard byte-level alphabet: printable bytes map to themselves,
  /// the rest to remapped codepoints starting at U+0100 (so every byte is
  /// covered).
  static const Alphabet& standard_alphabet();

  /// Builds a vocabulary over the standard alphabet. The optional token→id
  /// map is validated: every merge product must be present. Throws
  /// VocabError on duplicate merges or missing products.
  static BpeVocab from_merges(
      std::vector<MergeRule> merges,
      std::optional<std::map<std::string, long>> vocab = std::nullopt);

  /// Same, over a custom (possibly partial) alphabet.
  static BpeVocab from_merges_with_alphabet(
      std::vector<MergeRule> merges, Alphabet alphabet,
      std::optional<std::map<std::string, long>> vocab = std::nullopt);

  /// Loads the standard two-file format: merges.txt (one "left right" pair
  /// per line, optional "#version" header) and an optional vocab.json
  /// (token → id map).
  static BpeVocab load(std::istream& merges_txt,
                       std::istream* vocab_json = nullptr);

  /// Applies the merge rules to one pretoken: bytes are mapped through the
  /// alphabet, then the lowest-rank adjacent pair is merged (all its
  /// occurrences, left to right) until no listed pair remains.
  std::vector<std::string> encode(std::string_view pretoken) const;

  std::size_t merge_count() const { return ordered_merges_.size(); }
  const std::vector<MergeRule>& merges() const { return ordered_merges_; }
  const Alphabet& alphabet() const { return alphabet_; }
  const std::optional<std::map<std::string, long>>& token_ids() const {
    return vocab_;
  }

 private:
  BpeVocab() = default;

  std::vector<MergeRule> ordered_merges_;
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
  Alphabet alphabet_;
  std::optional<std::map<std::string, long>> vocab_;
};

/// First pretoken of a text chunk under GPT-2-style pretokenization
/// (optional leading space glued to a letter/digit run; whitespace,
/// contraction and punctuation runs otherwise). Empty input → empty string.
std::string first_pretoken(std::string_view text);

/// First BPE token of a word, conventionally passed with its leading space
/// (" word"), as words are space-prefixed in running text. The input is
/// pretokenized first, so internal apostrophes or hyphens cannot merge
/// across pretoken boundaries. Returned in alphabet form (e.g. "Ġrun").
std::string bpe_first_token(std::string_view word_with_leading_space,
                            const BpeVocab& vocab);

/// First BPE token of raw generation text (same path: first pretoken, then
/// merges). Empty/whitespace-only text yields the encoded whitespace run or
/// "" for empty input.
std::string first_token_of_text(std::string_view text, const BpeVocab& vocab);

}  // namespace varcal
