#include "varcal/io.hpp"

#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

std::map<std::string, Cpd> read_cpds_jsonl(std::istream& in) {
  std::map<std::string, Cpd> cpds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("cpd file line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (!row.contains("context_id") || !row.contains("entries") ||
        !row.at("entries").is_object()) {
      throw SchemaError("cpd file line " + std::to_string(line_no) +
                        ": expected context_id and an entries object");
    }
    const std::string context_id = row.at("context_id").get<std::string>();
    Cpd::Entries entries;
    for (auto& [word, prob] : row.at("entries").items()) {
      entries[word] = prob.get<double>();
    }
    Cpd cpd;
    try {
      cpd = Cpd::from_entries(std::move(entries));
    } catch (const Error& e) {
      throw IntegrityError("cpd file line " + std::to_string(line_no) +
                           " (" + context_id + "): " + e.what());
    }
    auto [it, inserted] = cpds.emplace(context_id, std::move(cpd));
    if (!inserted) {
      throw IntegrityError("cpd file line " + std::to_string(line_no) +
                           ": duplicate context " + context_id);
    }
  }
  return cpds;
}

void write_cpds_jsonl(std::ostream& out,
                      const std::map<std::string, Cpd>& cpds,
                      const CpdFileMeta& meta) {
  for (const auto& [context_id, cpd] : cpds) {
    ordered_json row;
    row["context_id"] = context_id;
    row["model_id"] = meta.model_id;
    row["estimator"] = meta.estimator;
    if (meta.n_samples.has_value()) {
      row["n_samples"] = *meta.n_samples;
    } else {
      row["n_samples"] = nullptr;
    }
    ordered_json entries;
    for (const auto& [word, prob] : cpd.entries()) entries[word] = prob;
    row["entries"] = entries;
    out << row.dump() << '\n';
  }
}

}  // namespace varcal
