#include "varcal/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "varcal/digest.hpp"
#include "varcal/errors.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

std::string manifest_to_json(const Manifest& manifest) {
  ordered_json doc;
  doc["tool_version"] = manifest.tool_version;
  doc["subcommand"] = manifest.subcommand;
  ordered_json inputs = ordered_json::array();
  for (const auto& [path, digest] : manifest.inputs) {
    ordered_json entry;
    entry["path"] = path;
    entry["sha256"] = digest;
    inputs.push_back(entry);
  }
  doc["inputs"] = inputs;
  doc["options"] = manifest.options;
  doc["outputs"] = manifest.outputs;
  return doc.dump(2) + "\n";
}

void add_input_digest(Manifest& manifest, const std::string& path) {
  manifest.inputs.emplace_back(path, sha256_file_hex(path));
}

void write_manifest(const Manifest& manifest, const std::string& out_dir) {
  const auto path = std::filesystem::path(out_dir) / "manifest.json";
  std::ofstream out(path);
  if (!out) {
    throw ReportError("cannot write manifest: " + path.string());
  }
  out << manifest_to_json(manifest);
}

}  // namespace varcal
