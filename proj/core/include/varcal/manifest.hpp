#pragma once

#include <map>
#include <string>
#include <vector>

namespace varcal {

/// Reproducibility record written next to every run's artifacts: tool
/// version, input digests, the options/seeds used, and the outputs
/// produced. Deliberately carries no timestamps so re-runs are
/// byte-identical.
struct Manifest {
  std::string tool_version;
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> inputs;  // path -> sha256
  std::map<std::string, std::string> options;  // rendered flag values
  std::vector<std::string> outputs;            // artifact paths
};

std::string manifest_to_json(const Manifest& manifest);

/// Hashes the file at `path` and appends (path, digest) to inputs.
void add_input_digest(Manifest& manifest, const std::string& path);

/// Writes manifest.json into out_dir.
void write_manifest(const Manifest& manifest, const std::string& out_dir);

}  // namespace varcal
