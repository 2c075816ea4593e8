#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "varcal/cpd.hpp"

namespace varcal {

/// One passage prefix plus its corpus continuation word; the unit of
/// evaluation.
struct Context {
  std::string context_id;
  std::string passage_id;
  int word_number = 1;  // position of the predicted word in the passage
  std::string context_text;
  std::string corpus_word;  // normalized
};

/// Multiset of human next-word answers attached to a context. Words are
/// normalized and distinct; counts are positive.
struct ResponseSet {
  std::string context_id;
  std::vector<std::pair<std::string, long>> responses;  // sorted by word

  long total() const;
  WordCounts to_counts() const;
};

struct Provenance {
  std::string source_digest;  // sha256 of the ingested bytes
  std::string options;        // ingestion options, rendered as text
};

struct IngestionSummary {
  long rows_read = 0;
  long responses_ingested = 0;
  long empty_responses_dropped = 0;
  long multiword_responses_truncated = 0;
};

/// Canonical in-memory dataset: contexts sorted by (passage_id, word_number)
/// with passage ids compared numerically when both parse as integers.
struct Dataset {
  std::vector<Context> contexts;
  std::map<std::string, ResponseSet> response_sets;  // keyed by context_id
  Provenance provenance;
  IngestionSummary ingestion;

  const Context* find_context(const std::string& context_id) const;
};

/// Declares which CSV header plays which role. The Provo release's own column
/// names are not assumed; callers map them explicitly.
struct CsvColumnMap {
  std::string passage;   // --col-passage
  std::string word_num;  // --col-wordnum
  std::string context;   // --col-context
  std::string target;    // --col-target
  std::string response;  // --col-response
  std::optional<std::string> count;  // --col-count, one row per answer if unset
};

/// Parses a delimited table with one row per human answer (or answer+count).
/// Responses are normalized and aggregated; empty answers are dropped and
/// counted in the ingestion summary; multi-word answers are truncated to
/// their first word by the same slicer used for model text.
///
/// Throws SchemaError (missing mapped column), IntegrityError (conflicting
/// duplicate contexts, unusable corpus words), EmptyDatasetError, ParseError.
Dataset parse_provo_csv(std::istream& raw, const CsvColumnMap& columns);

/// Parses the canonical dataset JSONL (one object per line):
///   {"context_id", "passage_id", "word_number", "context_text",
///    "corpus_word", "responses": [{"word", "count"}, ...]}
/// Round-trips with emit_canonical_jsonl. Throws ParseError with the line
/// number on malformed lines and IntegrityError on invariant violations.
Dataset parse_canonical_jsonl(std::istream& raw);

/// Canonical emission: contexts in dataset order, responses sorted by word,
/// fixed key order, no timestamps. parse(emit(d)) == d, and emit is a
/// fixpoint over parse for files already in canonical form.
std::string emit_canonical_jsonl(const Dataset& dataset);

struct ValidationReport {
  std::size_t context_count = 0;
  std::size_t response_set_count = 0;
  long min_responses = 0;
  double median_responses = 0.0;
  long max_responses = 0;
  std::vector<std::string> breaches;  // human-readable invariant violations

  bool ok() const { return breaches.empty(); }
};

/// Reporting only; never mutates and never throws on breaches.
ValidationReport validate_dataset(const Dataset& dataset);

/// Ordering used for canonical context order; exposed for reuse in tests.
bool context_order_less(const Context& a, const Context& b);

}  // namespace varcal
