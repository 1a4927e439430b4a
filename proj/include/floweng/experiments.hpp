#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>

// Experiment orchestration shared by the command-line tool and the tests:
// config validation, the experiment runners, CSV/manifest persistence.
//
// A config is a single JSON object:
//   {
//     "experiment": "eta-sweep",
//     "output_dir": "out/sweep",
//     "seed": 7,
//     "parallelism": 1,
//     "parameters": { ... experiment-specific ... }
//   }
// Unknown keys anywhere are rejected. `floweng schema` prints the full key
// reference with defaults.

namespace floweng {

inline constexpr const char* kLibraryVersion = "1.0.0";

// Environment variable that redirects relative output directories.
inline constexpr const char* kOutputRootEnv = "FLOWENG_OUTPUT_ROOT";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Full key/type/default reference for every experiment.
std::string schema_text();

// Throws ConfigError on unknown keys, type mismatches, missing required
// fields, or out-of-range values. Returns the config with defaults filled in.
nlohmann::json validate_config(const nlohmann::json& config);

struct RunOutcome {
    std::filesystem::path output_dir;
    nlohmann::json manifest;
};

// Validates, resolves the output directory (honoring the env override for
// relative paths), runs the experiment, writes its CSV artifacts plus
// manifest.json, and returns the manifest. Numerical failures propagate as
// exceptions other than ConfigError.
RunOutcome run_experiment(const nlohmann::json& config);

}  // namespace floweng
