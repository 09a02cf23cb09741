#pragma once

#include "pearl/workflows/workflows.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pearl::frontdoor {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOperational = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the `pearl` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads an experiment spec file. Relative paths resolve against the file's
// directory. Returns the spec and the directory reports are written to.
struct LoadedExperiment {
    workflows::ExperimentSpec spec;
    std::filesystem::path output_dir;
};
LoadedExperiment load_experiment_spec(const std::filesystem::path& path);
LoadedExperiment experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace pearl::frontdoor
