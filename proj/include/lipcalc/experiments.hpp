#pragma once

#include "lipcalc/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace lipcalc {

struct AssertionResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct OutputFile {
    std::string name;      ///< relative to the run directory
    std::uint64_t bytes = 0;
    std::string checksum;  ///< FNV-1a 64, hex
};

/// Everything needed to reproduce a run; written as manifest.json in the run directory.
struct RunManifest {
    std::string experiment;
    nlohmann::json config;  ///< defaults merged with overrides
    std::uint64_t seed = 0;
    std::string version;
    std::vector<OutputFile> outputs;
    std::vector<AssertionResult> assertions;
    double wall_clock_seconds = 0;
    bool passed() const;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

struct ExperimentInfo {
    std::string id;
    std::string title;
    nlohmann::json defaults;
};

const std::vector<ExperimentInfo>& experiment_registry();

/// Runs a registered experiment into out_dir (created if needed) and writes
/// the CSV tables, config.json and manifest.json there. Unknown ids throw an
/// Error listing the registry.
RunManifest run_experiment(const std::string& id, const nlohmann::json& overrides, std::uint64_t seed,
                           const std::string& out_dir);

struct ReplayReport {
    bool identical = true;
    std::vector<std::string> differences;
    RunManifest rerun;
};

/// Re-runs the manifest's experiment with its recorded config and seed into
/// scratch_dir and compares every recorded output byte for byte with the
/// files next to the manifest.
ReplayReport replay(const std::string& manifest_path, const std::string& scratch_dir);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace lipcalc
