#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>

#include "config.hpp"
#include "output.hpp"

namespace umae::lab {

struct RunContext {
  ExperimentConfig config;
  nlohmann::json resolved;
  Dataset dataset;  // empty for report
  int threads = 1;
};

/// Runs one subcommand, staging its files in `out` and printing a short
/// summary to `log`. Returns the process exit status.
int run_command(const std::string& name, const RunContext& ctx, OutputSet& out, std::ostream& log);

}  // namespace umae::lab
