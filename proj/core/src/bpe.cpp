#include "varcal/bpe.hpp"

#include <istream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"

namespace varcal {

namespace {

std::string encode_codepoint(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

bool is_printable_base(int b) {
  // The bytes that map to themselves: '!'..'~', '¡'..'¬', '®'..'ÿ'.
  return (b >= 0x21 && b <= 0x7E) || (b >= 0xA1 && b <= 0xAC) ||
         (b >= 0xAE && b <= 0xFF);
}

bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

enum class ByteClass { kSpace, kLetter, kDigit, kPunct };

// Byte-level approximation of the unicode categories the pretokenizer
// needs: multi-byte UTF-8 sequences group with letters.
ByteClass classify(unsigned char c) {
  if (ascii_space(static_cast<char>(c))) return ByteClass::kSpace;
  if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80) {
    return ByteClass::kLetter;
  }
  if (c >= '0' && c <= '9') return ByteClass::kDigit;
  return ByteClass::kPunct;
}

}  // namespace

const BpeVocab::Alphabet& BpeVocab::standard_alphabet() {
  static const Alphabet alphabet = [] {
    Alphabet a;
    std::uint32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      if (is_printable_base(b)) {
        a[b] = encode_codepoint(static_cast<std::uint32_t>(b));
      } else {
        a[b] = encode_codepoint(next++);
      }
    }
    return a;
  }();
  return alphabet;
}

BpeVocab BpeVocab::from_merges(
    std::vector<MergeRule> merges,
    std::optional<std::map<std::string, long>> vocab) {
  return from_merges_with_alphabet(std::move(merges), standard_alphabet(),
                                   std::move(vocab));
}

BpeVocab BpeVocab::from_merges_with_alphabet(
    std::vector<MergeRule> merges, Alphabet alphabet,
    std::optional<std::map<std::string, long>> vocab) {
  BpeVocab v;
  v.alphabet_ = std::move(alphabet);
  for (std::size_t i = 0; i < merges.size(); ++i) {
    auto [it, inserted] =
        v.ranks_.emplace(std::pair{merges[i].left, merges[i].right}, i);
    if (!inserted) {
      throw VocabError("duplicate merge rule at position " +
                       std::to_string(i) + ": \"" + merges[i].left + " " +
                       merges[i].right + "\"");
    }
  }
  if (vocab.has_value()) {
    for (const auto& rule : merges) {
      const std::string product = rule.left + rule.right;
      if (vocab->find(product) == vocab->end()) {
        throw VocabError("merge product \"" + product +
                         "\" missing from vocabulary");
      }
    }
  }
  v.ordered_merges_ = std::move(merges);
  v.vocab_ = std::move(vocab);
  return v;
}

BpeVocab BpeVocab::load(std::istream& merges_txt, std::istream* vocab_json) {
  std::vector<MergeRule> merges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(merges_txt, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("#version", 0) == 0) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 ||
        space + 1 >= line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw FormatError("merges line " + std::to_string(line_no) +
                        ": expected \"left right\"");
    }
    merges.push_back({line.substr(0, space), line.substr(space + 1)});
  }
  std::optional<std::map<std::string, long>> vocab;
  if (vocab_json != nullptr) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(*vocab_json);
    } catch (const std::exception& e) {
      throw ParseError(std::string("vocab.json: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("vocab.json: expected an object");
    std::map<std::string, long> ids;
    for (auto& [token, id] : doc.items()) {
      if (!id.is_number_integer()) {
        throw FormatError("vocab.json: non-integer id for \"" + token + "\"");
      }
      ids[token] = id.get<long>();
    }
    vocab = std::move(ids);
  }
  return from_merges(std::move(merges), std::move(vocab));
}

std::vector<std::string> BpeVocab::encode(std::string_view pretoken) const {
  std::vector<std::string> symbols;
  symbols.reserve(pretoken.size());
  for (unsigned char byte : pretoken) {
    const auto& mapped = alphabet_[byte];
    if (!mapped.has_value()) {
      throw VocabError("byte 0x" + [](unsigned char b) {
        const char* hex = "0123456789abcdef";
        return std::string{hex[b >> 4], hex[b & 0xF]};
      }(byte) + " has no alphabet symbol");
    }
    symbols.push_back(*mapped);
  }
  if (symbols.size() < 2) return symbols;
  while (true) {
    // Lowest-rank adjacent pair wins; all its occurrences merge at once.
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    const std::pair<std::string, std::string>* best_pair = nullptr;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find({symbols[i], symbols[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_pair = &it->first;
      }
    }
    if (best_pair == nullptr) break;
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == best_pair->first &&
          symbols[i + 1] == best_pair->second) {
        merged.push_back(symbols[i] + symbols[i + 1]);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        i += 1;
      }
    }
    symbols = std::move(merged);
    if (symbols.size() < 2) break;
  }
  return symbols;
}

std::string first_pretoken(std::string_view text) {
  if (text.empty()) return "";
  const auto cls = [&](std::size_t i) {
    return classify(static_cast<unsigned char>(text[i]));
  };
  std::size_t i = 0;
  if (cls(0) == ByteClass::kSpace) {
    std::size_t run = 0;
    while (run < text.size() && cls(run) == ByteClass::kSpace) ++run;
    if (run == text.size()) return std::string(text);  // trailing whitespace
    if (text[run - 1] == ' ' &&
        (cls(run) == ByteClass::kLetter || cls(run) == ByteClass::kDigit ||
         cls(run) == ByteClass::kPunct)) {
      if (run > 1) {
        // All but the final space: that space prefixes the next pretoken.
        return std::string(text.substr(0, run - 1));
      }
      i = 1;  // single space glues onto the following run
    } else {
      return std::string(text.substr(0, run));
    }
  } else if (text[0] == '\'' && text.size() > 1) {
    // Contraction pretokens: 's 't 're 've 'm 'll 'd
    for (std::string_view suffix : {"'s", "'t", "'re", "'ve", "'m", "'ll",
                                    "'d"}) {
      if (text.substr(0, suffix.size()) == suffix) {
        return std::string(suffix);
      }
    }
  }
  const ByteClass run_class = cls(i);
  std::size_t end = i;
  while (end < text.size() && cls(end) == run_class) ++end;
  return std::string(text.substr(0, end));
}

std::string bpe_first_token(std::string_view word_with_leading_space,
                            const BpeVocab& vocab) {
  const std::string pretoken = first_pretoken(word_with_leading_space);
  auto tokens = vocab.encode(pretoken);
  if (tokens.empty()) return "";
  return tokens.front();
}

std::string first_token_of_text(std::string_view text, const BpeVocab& vocab) {
  return bpe_first_token(text, vocab);
}

}  // namespace varcal
