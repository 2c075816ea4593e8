#include "varcal/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "varcal/digest.hpp"
#include "varcal/errors.hpp"

namespace varcal {

namespace {

using ordered_json = nlohmann::ordered_json;

// RFC-4180 style reader: quoted fields, embedded delimiters/newlines,
// doubled quotes. Returns one record per call; false on end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  int c;
  while ((c = in.get()) != EOF) {
    saw_any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && field.empty()) {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(ch);
    }
  }
  if (!saw_any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(b, e - b + 1);
}

std::optional<long> parse_long(const std::string& s) {
  const std::string t = trim(s);
  long value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

void sort_contexts(Dataset& dataset) {
  std::sort(dataset.contexts.begin(), dataset.contexts.end(),
            context_order_less);
}

void check_dataset_invariants(const Dataset& dataset) {
  std::map<std::string, int> seen;
  for (const auto& ctx : dataset.contexts) {
    if (++seen[ctx.context_id] > 1) {
      throw IntegrityError("duplicate context_id '" + ctx.context_id + "'");
    }
    if (trim(ctx.context_text).empty()) {
      throw IntegrityError("context '" + ctx.context_id +
                           "' has empty context_text");
    }
    if (ctx.corpus_word.empty() ||
        normalize_word(ctx.corpus_word) != ctx.corpus_word) {
      throw IntegrityError("context '" + ctx.context_id +
                           "' corpus_word is not a normalized word");
    }
    if (ctx.word_number < 1) {
      throw IntegrityError("context '" + ctx.context_id +
                           "' has word_number < 1");
    }
    auto rs = dataset.response_sets.find(ctx.context_id);
    if (rs == dataset.response_sets.end() || rs->second.responses.empty()) {
      throw IntegrityError("context '" + ctx.context_id +
                           "' has no responses");
    }
  }
  for (const auto& [id, rs] : dataset.response_sets) {
    if (seen.find(id) == seen.end()) {
      throw IntegrityError("response set '" + id + "' has no context");
    }
    std::string prev;
    for (const auto& [word, count] : rs.responses) {
      if (count < 1) {
        throw IntegrityError("response '" + word + "' in '" + id +
                             "' has count < 1");
      }
      if (word.empty() || normalize_word(word) != word) {
        throw IntegrityError("response word '" + word + "' in '" + id +
                             "' is not normalized");
      }
      if (!prev.empty() && !(prev < word)) {
        throw IntegrityError("responses of '" + id +
                             "' are not sorted/distinct");
      }
      prev = word;
    }
  }
}

}  // namespace

long ResponseSet::total() const {
  long n = 0;
  for (const auto& [word, count] : responses) n += count;
  return n;
}

WordCounts ResponseSet::to_counts() const {
  WordCounts wc;
  for (const auto& [word, count] : responses) wc.add(word, count);
  return wc;
}

const Context* Dataset::find_context(const std::string& context_id) const {
  for (const auto& ctx : contexts) {
    if (ctx.context_id == context_id) return &ctx;
  }
  return nullptr;
}

bool context_order_less(const Context& a, const Context& b) {
  auto pa = parse_long(a.passage_id);
  auto pb = parse_long(b.passage_id);
  if (pa && pb) {
    if (*pa != *pb) return *pa < *pb;
  } else if (a.passage_id != b.passage_id) {
    return a.passage_id < b.passage_id;
  }
  if (a.word_number != b.word_number) return a.word_number < b.word_number;
  return a.context_id < b.context_id;
}

Dataset parse_provo_csv(std::istream& raw, const CsvColumnMap& columns) {
  std::ostringstream buffered;
  buffered << raw.rdbuf();
  const std::string bytes = buffered.str();
  std::istringstream in(bytes);

  std::vector<std::string> header;
  if (!read_csv_record(in, header)) {
    throw EmptyDatasetError("csv input is empty");
  }
  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw SchemaError("csv is missing mapped column '" + name + "'");
  };
  const std::size_t col_passage = column_index(columns.passage);
  const std::size_t col_wordnum = column_index(columns.word_num);
  const std::size_t col_context = column_index(columns.context);
  const std::size_t col_target = column_index(columns.target);
  const std::size_t col_response = column_index(columns.response);
  std::optional<std::size_t> col_count;
  if (columns.count) col_count = column_index(*columns.count);

  struct Accum {
    Context ctx;
    WordCounts counts;
  };
  std::map<std::pair<std::string, long>, Accum> by_key;

  Dataset dataset;
  std::vector<std::string> fields;
  long line = 1;
  while (read_csv_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    auto field = [&](std::size_t idx) -> std::string {
      if (idx >= fields.size()) {
        throw ParseError("line " + std::to_string(line) +
                         ": row has too few fields");
      }
      return fields[idx];
    };
    dataset.ingestion.rows_read += 1;

    const std::string passage = trim(field(col_passage));
    auto word_number = parse_long(field(col_wordnum));
    if (passage.empty() || !word_number || *word_number < 1) {
      throw ParseError("line " + std::to_string(line) +
                       ": bad passage id or word number");
    }
    const std::string context_text = field(col_context);
    auto corpus_word = first_word(field(col_target), /*end_is_boundary=*/true);
    if (!corpus_word) {
      throw IntegrityError("line " + std::to_string(line) +
                           ": corpus word does not normalize to a word");
    }

    const std::pair<std::string, long> key{passage, *word_number};
    auto [it, inserted] = by_key.try_emplace(key);
    Accum& acc = it->second;
    if (inserted) {
      acc.ctx.passage_id = passage;
      acc.ctx.word_number = static_cast<int>(*word_number);
      acc.ctx.context_id = passage + "_" + std::to_string(*word_number);
      acc.ctx.context_text = context_text;
      acc.ctx.corpus_word = *corpus_word;
    } else {
      if (acc.ctx.context_text != context_text) {
        throw IntegrityError("line " + std::to_string(line) +
                             ": conflicting context_text for passage " +
                             passage + " word " + std::to_string(*word_number));
      }
      if (acc.ctx.corpus_word != *corpus_word) {
        throw IntegrityError("line " + std::to_string(line) +
                             ": conflicting corpus word for passage " +
                             passage + " word " + std::to_string(*word_number));
      }
    }

    long count = 1;
    if (col_count) {
      auto parsed = parse_long(field(*col_count));
      if (!parsed || *parsed < 1) {
        throw ParseError("line " + std::to_string(line) +
                         ": response count is not a positive integer");
      }
      count = *parsed;
    }
    const std::string raw_response = field(col_response);
    auto sliced = first_word(raw_response, /*end_is_boundary=*/true);
    if (!sliced) {
      dataset.ingestion.empty_responses_dropped += count;
      continue;
    }
    if (normalize_word(raw_response) != *sliced) {
      dataset.ingestion.multiword_responses_truncated += count;
    }
    acc.counts.add(*sliced, count);
    dataset.ingestion.responses_ingested += count;
  }

  for (auto& [key, acc] : by_key) {
    if (acc.counts.empty()) continue;  // every answer for it was dropped
    ResponseSet rs;
    rs.context_id = acc.ctx.context_id;
    for (const auto& [word, count] : acc.counts.counts) {
      rs.responses.emplace_back(word, count);
    }
    dataset.response_sets.emplace(rs.context_id, std::move(rs));
    dataset.contexts.push_back(std::move(acc.ctx));
  }
  if (dataset.contexts.empty()) {
    throw EmptyDatasetError("csv produced zero usable contexts");
  }
  sort_contexts(dataset);
  dataset.provenance.source_digest = sha256_hex(bytes);
  dataset.provenance.options =
      "csv:" + columns.passage + "," + columns.word_num + "," +
      columns.context + "," + columns.target + "," + columns.response +
      (columns.count ? "," + *columns.count : "");
  check_dataset_invariants(dataset);
  return dataset;
}

Dataset parse_canonical_jsonl(std::istream& raw) {
  std::ostringstream buffered;
  buffered << raw.rdbuf();
  const std::string bytes = buffered.str();

  Dataset dataset;
  std::istringstream in(bytes);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      Context ctx;
      ctx.context_id = record.at("context_id").get<std::string>();
      ctx.passage_id = record.at("passage_id").get<std::string>();
      ctx.word_number = record.at("word_number").get<int>();
      ctx.context_text = record.at("context_text").get<std::string>();
      ctx.corpus_word = record.at("corpus_word").get<std::string>();
      ResponseSet rs;
      rs.context_id = ctx.context_id;
      for (const auto& item : record.at("responses")) {
        rs.responses.emplace_back(item.at("word").get<std::string>(),
                                  item.at("count").get<long>());
      }
      std::sort(rs.responses.begin(), rs.responses.end());
      dataset.contexts.push_back(std::move(ctx));
      dataset.response_sets.emplace(rs.context_id, std::move(rs));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (dataset.contexts.empty()) {
    throw EmptyDatasetError("jsonl produced zero contexts");
  }
  sort_contexts(dataset);
  dataset.provenance.source_digest = sha256_hex(bytes);
  dataset.provenance.options = "jsonl";
  dataset.ingestion.rows_read = line_no;
  for (const auto& [id, rs] : dataset.response_sets) {
    dataset.ingestion.responses_ingested += rs.total();
  }
  check_dataset_invariants(dataset);
  return dataset;
}

std::string emit_canonical_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& ctx : dataset.contexts) {
    ordered_json record;
    record["context_id"] = ctx.context_id;
    record["passage_id"] = ctx.passage_id;
    record["word_number"] = ctx.word_number;
    record["context_text"] = ctx.context_text;
    record["corpus_word"] = ctx.corpus_word;
    ordered_json responses = ordered_json::array();
    auto rs = dataset.response_sets.find(ctx.context_id);
    if (rs != dataset.response_sets.end()) {
      for (const auto& [word, count] : rs->second.responses) {
        responses.push_back(ordered_json{{"word", word}, {"count", count}});
      }
    }
    record["responses"] = std::move(responses);
    out += record.dump();
    out += '\n';
  }
  return out;
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  report.context_count = dataset.contexts.size();
  report.response_set_count = dataset.response_sets.size();

  std::map<std::string, int> ids;
  std::vector<long> totals;
  for (const auto& ctx : dataset.contexts) {
    if (++ids[ctx.context_id] > 1) {
      report.breaches.push_back("duplicate context_id '" + ctx.context_id +
                                "'");
    }
    if (trim(ctx.context_text).empty()) {
      report.breaches.push_back("context '" + ctx.context_id +
                                "' has empty context_text");
    }
    if (ctx.corpus_word.empty() ||
        normalize_word(ctx.corpus_word) != ctx.corpus_word) {
      report.breaches.push_back("context '" + ctx.context_id +
                                "' corpus_word not normalized");
    }
    auto rs = dataset.response_sets.find(ctx.context_id);
    if (rs == dataset.response_sets.end()) {
      report.breaches.push_back("context '" + ctx.context_id +
                                "' has no response set");
    } else {
      totals.push_back(rs->second.total());
    }
  }
  for (const auto& [id, rs] : dataset.response_sets) {
    if (ids.find(id) == ids.end()) {
      report.breaches.push_back("orphan response set '" + id + "'");
    }
    for (const auto& [word, count] : rs.responses) {
      if (count < 1) {
        report.breaches.push_back("response '" + word + "' in '" + id +
                                  "' has count < 1");
      }
    }
  }
  if (!totals.empty()) {
    std::sort(totals.begin(), totals.end());
    report.min_responses = totals.front();
    report.max_responses = totals.back();
    const std::size_t n = totals.size();
    report.median_responses =
        (n % 2 == 1) ? static_cast<double>(totals[n / 2])
                     : 0.5 * static_cast<double>(totals[n / 2 - 1] +
                                                 totals[n / 2]);
  }
  return report;
}

}  // namespace varcal
