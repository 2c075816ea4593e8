#include "varcal/cpd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "varcal/errors.hpp"
#include "varcal/rng.hpp"

namespace varcal {

namespace {

// Decoded codepoint plus the byte length it consumed.
struct Decoded {
  char32_t cp;
  int len;
};

// UTF-8 decoding with a Latin-1 fallback for invalid sequences, so arbitrary
// byte streams still normalize deterministically.
Decoded decode_utf8(std::string_view s, std::size_t i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto cb = [&](std::size_t k) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
  };
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | cb(1);
    if (cp >= 0x80) return {cp, 2};
  } else if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    char32_t cp =
        (static_cast<char32_t>(b0 & 0x0F) << 12) | (cb(1) << 6) | cb(2);
    if (cp >= 0x800) return {cp, 3};
  } else if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    char32_t cp = (static_cast<char32_t>(b0 & 0x07) << 18) | (cb(1) << 12) |
                  (cb(2) << 6) | cb(3);
    if (cp >= 0x10000 && cp <= 0x10FFFF) return {cp, 4};
  }
  return {b0, 1};  // invalid byte: treat as Latin-1
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Typographic variants that should behave like their ASCII forms.
char32_t premap(char32_t cp) {
  switch (cp) {
    case 0x2018:
    case 0x2019:
      return '\'';
    case 0x201C:
    case 0x201D:
      return '"';
    case 0x2010:
    case 0x2011:
      return '-';
    default:
      return cp;
  }
}

char32_t fold_case(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

// Letters and digits. Codepoints past Latin-1 count as letters except the
// general/supplemental/CJK punctuation blocks; that covers the corpora this
// toolkit targets without pulling in a Unicode database.
bool is_word_cp(char32_t cp) {
  if ((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
      (cp >= 'A' && cp <= 'Z'))
    return true;
  if (cp >= 0xC0 && cp <= 0xFF && cp != 0xD7 && cp != 0xF7) return true;
  if (cp >= 0x100) {
    if (cp >= 0x2000 && cp <= 0x206F) return false;
    if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    return true;
  }
  return false;
}

std::vector<char32_t> decode_all(std::string_view raw) {
  std::vector<char32_t> cps;
  cps.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    Decoded d = decode_utf8(raw, i);
    cps.push_back(premap(d.cp));
    i += static_cast<std::size_t>(d.len);
  }
  return cps;
}

}  // namespace

std::string normalize_word(std::string_view raw) {
  const std::vector<char32_t> cps = decode_all(raw);
  std::size_t first = cps.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (is_word_cp(cps[i])) {
      if (first == cps.size()) first = i;
      last = i;
    }
  }
  if (first == cps.size()) return {};
  std::string out;
  for (std::size_t i = first; i <= last; ++i) encode_utf8(fold_case(cps[i]), out);
  return out;
}

std::optional<std::string> first_word(std::string_view text,
                                      bool treat_end_as_boundary) {
  const std::vector<char32_t> cps = decode_all(text);
  std::size_t i = 0;
  auto is_ws = [](char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  while (i < cps.size() && is_ws(cps[i])) ++i;

  // Maximal run of word characters; apostrophe/hyphen join the run only when
  // flanked by word characters on both sides.
  std::size_t start = i;
  std::size_t end = i;
  while (end < cps.size()) {
    char32_t c = cps[end];
    if (is_word_cp(c)) {
      ++end;
      continue;
    }
    if ((c == '\'' || c == '-') && end > start && is_word_cp(cps[end - 1]) &&
        end + 1 < cps.size() && is_word_cp(cps[end + 1])) {
      ++end;
      continue;
    }
    break;
  }
  if (end == start) return std::nullopt;  // no word characters at the front
  if (end == cps.size() && !treat_end_as_boundary) {
    return std::nullopt;  // run hit the end of the text: possibly truncated
  }
  std::string run;
  for (std::size_t k = start; k < end; ++k) encode_utf8(cps[k], run);
  std::string word = normalize_word(run);
  if (word.empty()) return std::nullopt;
  return word;
}

Cpd Cpd::from_entries(Entries entries) {
  double mass = 0.0;
  for (auto it = entries.begin(); it != entries.end();) {
    const double p = it->second;
    if (!std::isfinite(p) || p < 0.0) {
      throw IntegrityError("cpd entry '" + it->first +
                           "' has invalid probability");
    }
    if (p == 0.0) {
      it = entries.erase(it);
      continue;
    }
    mass += p;
    ++it;
  }
  if (entries.empty()) throw IntegrityError("cpd has empty support");
  if (std::abs(mass - 1.0) > kCpdMassTolerance) {
    throw IntegrityError("cpd mass " + std::to_string(mass) +
                         " is not 1 within tolerance");
  }
  return Cpd(std::move(entries));
}

double Cpd::probability(const std::string& word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? 0.0 : it->second;
}

void WordCounts::add(const std::string& word, long count) {
  if (count <= 0) throw IntegrityError("word count must be positive");
  counts[word] += count;
  total += count;
}

Cpd mle(const WordCounts& counts) {
  if (counts.empty() || counts.total <= 0) {
    throw EstimationError("mle over empty counts");
  }
  Cpd::Entries entries;
  const double total = static_cast<double>(counts.total);
  for (const auto& [word, count] : counts.counts) {
    entries[word] = static_cast<double>(count) / total;
  }
  return Cpd::from_entries(std::move(entries));
}

double tvd(const Cpd& p, const Cpd& q) {
  double sum = 0.0;
  auto ip = p.entries().begin();
  auto iq = q.entries().begin();
  while (ip != p.entries().end() || iq != q.entries().end()) {
    if (iq == q.entries().end() ||
        (ip != p.entries().end() && ip->first < iq->first)) {
      sum += ip->second;
      ++ip;
    } else if (ip == p.entries().end() || iq->first < ip->first) {
      sum += iq->second;
      ++iq;
    } else {
      sum += std::abs(ip->second - iq->second);
      ++ip;
      ++iq;
    }
  }
  return std::min(1.0, 0.5 * sum);
}

double entropy(const Cpd& p) {
  double h = 0.0;
  for (const auto& [word, prob] : p.entries()) {
    h -= prob * std::log(prob);
  }
  return std::max(0.0, h);
}

ModeResult mode(const Cpd& p, TieBreak rule, std::uint64_t seed) {
  if (p.empty()) throw EstimationError("mode of empty cpd");
  double best = -1.0;
  for (const auto& [word, prob] : p.entries()) {
    best = std::max(best, prob);
  }
  std::vector<const std::string*> tied;
  for (const auto& [word, prob] : p.entries()) {
    if (prob == best) tied.push_back(&word);
  }
  ModeResult result;
  result.probability = best;
  result.tied = tied.size() > 1;
  if (rule == TieBreak::kLexicographic || tied.size() == 1) {
    result.word = *tied.front();  // map iteration is already lexicographic
  } else {
    Rng rng(seed);
    result.word = *tied[static_cast<std::size_t>(rng.bounded(tied.size()))];
  }
  return result;
}

}  // namespace varcal
