#include "varcal/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <sstream>

#include "varcal/errors.hpp"

namespace varcal {

namespace {

constexpr double kConstantStd = 1e-12;

long parse_positive_long(const std::string& token, const char* what) {
  long value = 0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value <= 0) {
    throw FormatError(std::string("embeddings header: bad ") + what + " \"" +
                      token + "\"");
  }
  return value;
}

void compute_scaling(EmbeddingTable& table) {
  const std::size_t dim = static_cast<std::size_t>(table.dimension);
  table.scale_mean.assign(dim, 0.0);
  table.scale_std.assign(dim, 0.0);
  table.constant_dims.assign(dim, false);
  const double n = static_cast<double>(table.vectors.size());
  if (table.vectors.empty()) return;
  for (const auto& [word, vec] : table.vectors) {
    for (std::size_t d = 0; d < dim; ++d) table.scale_mean[d] += vec[d];
  }
  for (std::size_t d = 0; d < dim; ++d) table.scale_mean[d] /= n;
  for (const auto& [word, vec] : table.vectors) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = vec[d] - table.scale_mean[d];
      table.scale_std[d] += diff * diff;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    table.scale_std[d] = std::sqrt(table.scale_std[d] / n);
    if (table.scale_std[d] < kConstantStd) {
      table.scale_std[d] = 0.0;
      table.constant_dims[d] = true;
    }
  }
}

EmbeddingTable load_text(std::istream& in, long count, long dim,
                         const std::optional<std::set<std::string>>& keep) {
  EmbeddingTable table;
  table.dimension = static_cast<int>(dim);
  std::string line;
  long row = 0;
  while (row < count && std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw FormatError("embeddings row " + std::to_string(row) +
                        ": empty line");
    }
    const auto first_space = line.find(' ');
    if (first_space == std::string::npos) {
      throw FormatError("embeddings row " + std::to_string(row) +
                        ": no values after word");
    }
    std::string word = line.substr(0, first_space);
    const bool wanted = !keep.has_value() || keep->count(word) > 0;
    if (!wanted) continue;
    std::vector<double> vec;
    vec.reserve(dim);
    const char* p = line.data() + first_space;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) {
        throw FormatError("embeddings row " + std::to_string(row) +
                          ": bad value near \"" + std::string(p, end) + "\"");
      }
      vec.push_back(value);
      p = next;
    }
    if (static_cast<long>(vec.size()) != dim) {
      throw FormatError("embeddings row " + std::to_string(row) +
                        ": expected " + std::to_string(dim) + " values, got " +
                        std::to_string(vec.size()));
    }
    table.vectors[std::move(word)] = std::move(vec);
  }
  if (row < count && !keep.has_value()) {
    throw FormatError("embeddings: header promised " + std::to_string(count) +
                      " rows, file has " + std::to_string(row));
  }
  return table;
}

EmbeddingTable load_binary(std::istream& in, long count, long dim,
                           const std::optional<std::set<std::string>>& keep) {
  EmbeddingTable table;
  table.dimension = static_cast<int>(dim);
  for (long row = 1; row <= count; ++row) {
    std::string word;
    char c;
    while (in.get(c)) {
      if (c == ' ') break;
      if (c != '\n') word += c;  // leading newlines separate entries
    }
    if (!in) {
      throw FormatError("embeddings row " + std::to_string(row) +
                        ": truncated word");
    }
    std::vector<char> raw(static_cast<std::size_t>(dim) * 4);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw FormatError("embeddings row " + std::to_string(row) +
                        ": truncated vector");
    }
    if (keep.has_value() && keep->count(word) == 0) continue;
    std::vector<double> vec(dim);
    for (long d = 0; d < dim; ++d) {
      float value = 0.0f;
      std::memcpy(&value, raw.data() + d * 4, 4);
      if (!std::isfinite(value)) {
        throw FormatError("embeddings row " + std::to_string(row) +
                          ": non-finite value");
      }
      vec[static_cast<std::size_t>(d)] = static_cast<double>(value);
    }
    table.vectors[std::move(word)] = std::move(vec);
  }
  return table;
}

}  // namespace

const std::vector<double>* EmbeddingTable::find(const std::string& word) const {
  auto it = vectors.find(word);
  return it == vectors.end() ? nullptr : &it->second;
}

std::vector<double> EmbeddingTable::scaled(const std::string& word) const {
  const auto* vec = find(word);
  if (vec == nullptr) {
    throw InputError("embedding table has no vector for \"" + word + "\"");
  }
  std::vector<double> out(vec->size());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = constant_dims[d] ? 0.0
                              : ((*vec)[d] - scale_mean[d]) / scale_std[d];
  }
  return out;
}

EmbeddingTable load_embeddings(
    std::istream& in, EmbeddingFormat format,
    const std::optional<std::set<std::string>>& restrict_to) {
  std::string header;
  if (!std::getline(in, header)) {
    throw FormatError("embeddings: missing header line");
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::istringstream hs(header);
  std::string count_token, dim_token, extra;
  if (!(hs >> count_token >> dim_token) || (hs >> extra)) {
    throw FormatError("embeddings header: expected \"<count> <dim>\", got \"" +
                      header + "\"");
  }
  const long count = parse_positive_long(count_token, "count");
  const long dim = parse_positive_long(dim_token, "dimension");

  EmbeddingTable table = format == EmbeddingFormat::kText
                             ? load_text(in, count, dim, restrict_to)
                             : load_binary(in, count, dim, restrict_to);
  compute_scaling(table);
  return table;
}

std::vector<std::vector<double>> standardize_vectors(
    const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) return {};
  const std::size_t dim = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw InputError("standardize_vectors: ragged input");
  }
  const double n = static_cast<double>(vectors.size());
  std::vector<double> mean(dim, 0.0), std_dev(dim, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
  }
  for (std::size_t d = 0; d < dim; ++d) mean[d] /= n;
  for (const auto& v : vectors) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = v[d] - mean[d];
      std_dev[d] += diff * diff;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    std_dev[d] = std::sqrt(std_dev[d] / n);
  }
  std::vector<std::vector<double>> out(vectors.size(),
                                       std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      out[i][d] = std_dev[d] < kConstantStd
                      ? 0.0
                      : (vectors[i][d] - mean[d]) / std_dev[d];
    }
  }
  return out;
}

}  // namespace varcal
