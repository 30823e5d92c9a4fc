#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "trajproj/harness.hpp"

namespace trajproj {

/// Where `report` writes its outputs; unset entries are skipped.
struct OutputPaths {
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> table;
  std::optional<std::filesystem::path> records;
};

/// A full run: the experiment plus output locations. The on-disk form is a
/// JSON document; see README.md for the key reference. Unknown keys are
/// rejected with the dotted path of the offending key.
struct RunConfig {
  ExperimentConfig experiment;
  OutputPaths output;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Serializes every setting, including defaults, so a report can be re-run.
std::string experiment_config_to_json(const ExperimentConfig& cfg);
std::string run_config_to_json(const RunConfig& cfg);
std::string system_config_to_json(const SystemConfig& cfg);

}  // namespace trajproj
