#pragma once

#include <stdexcept>
#include <string>

namespace varcal {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A delimited/structured input lacks a declared column or field.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Bytes could not be parsed at all (malformed CSV/JSON/embedding rows).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a dataset or type invariant.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Ingestion produced zero usable contexts.
class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

/// Distribution estimation received no usable observations.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// A metric was asked to summarize an empty or invalid point set.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Mismatched or inconsistent operation inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A candidate log-probability is invalid (non-finite or above zero).
class ScoringError : public Error {
 public:
  using Error::Error;
};

/// The scorer has no value for one or more requested words.
class MissingScoreError : public ScoringError {
 public:
  using ScoringError::ScoringError;
};

/// Generation collection failed after retries.
class CollectionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during an iterative numerical procedure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A binary/text container does not match its declared layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tokenizer vocabulary problems (bytes without an alphabet mapping, bad merges).
class VocabError : public Error {
 public:
  using Error::Error;
};

/// A response multiset is too small for the requested oracle split.
class SplitError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked without data its configuration requires.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Report construction over empty input.
class ReportError : public Error {
 public:
  using Error::Error;
};

/// External tag annotations lack a requested (context, word) pair.
class TaggingError : public Error {
 public:
  using Error::Error;
};

}  // namespace varcal
