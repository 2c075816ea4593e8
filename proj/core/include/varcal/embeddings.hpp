#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace varcal {

enum class EmbeddingFormat {
  kText,    // "<count> <dim>" header, then "word v1 ... vdim" lines
  kBinary,  // standard binary layout: "word " + dim float32s per entry
};

/// Immutable word → vector table with per-dimension scaling statistics
/// computed over the retained vectors.
struct EmbeddingTable {
  int dimension = 0;
  std::map<std::string, std::vector<double>> vectors;
  std::vector<double> scale_mean;
  std::vector<double> scale_std;        // population; 0 marks constant dims
  std::vector<bool> constant_dims;

  bool has(const std::string& word) const {
    return vectors.find(word) != vectors.end();
  }
  const std::vector<double>* find(const std::string& word) const;

  /// (v - mean) / std per dimension; constant dimensions map to 0.
  /// Throws InputError for words outside the table.
  std::vector<double> scaled(const std::string& word) const;
};

/// Loads a word2vec-format table. When `restrict_to` is given, only listed
/// words are kept (bounding memory for large files); scaling statistics are
/// computed over the retained set. Throws FormatError with the offending
/// row index on malformed rows or dimension mismatches.
EmbeddingTable load_embeddings(
    std::istream& in, EmbeddingFormat format = EmbeddingFormat::kText,
    const std::optional<std::set<std::string>>& restrict_to = std::nullopt);

/// Standard scaling over an explicit vector set (zero mean, unit variance
/// per dimension; constant dimensions map to 0). Used for the per-context
/// joint support before clustering.
std::vector<std::vector<double>> standardize_vectors(
    const std::vector<std::vector<double>>& vectors);

}  // namespace varcal
