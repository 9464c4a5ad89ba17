#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "photonparity/distillation.h"

namespace photonparity::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kUsageError = 2,
  kModelError = 3,
  kNotConverged = 4,
};

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::map<std::string, std::string> versions;
  std::vector<std::string> outputs;

  std::string to_json() const;
};

/// Named preset ("paper", "counting", "fiber", "vacuum") or the path
/// of a key-value file.  Besides the cavity keys a file may set
/// detection_error, uncorrected_loss and downstream_loss.
DistillationConfig load_config(const std::string& preset_or_path);

/// "MIN:MAX:STEPS" with STEPS >= 1 points, endpoints included.
std::vector<double> parse_grid(const std::string& spec);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace photonparity::cli
