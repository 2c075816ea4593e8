#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "varcal/cpd.hpp"

namespace varcal {

/// Metadata attached to a stored cpd file row.
struct CpdFileMeta {
  std::string model_id;
  std::string estimator;  // e.g. "mc", "biased", "oracle_a"
  std::optional<long> n_samples;
};

/// Cpd JSONL: one row per context,
/// {"context_id", "model_id", "estimator", "n_samples", "entries": {word: p}}.
std::map<std::string, Cpd> read_cpds_jsonl(std::istream& in);
void write_cpds_jsonl(std::ostream& out,
                      const std::map<std::string, Cpd>& cpds,
                      const CpdFileMeta& meta);

}  // namespace varcal
