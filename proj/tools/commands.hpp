// commands.hpp
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "report.hpp"

namespace qdlab::cli {

const std::vector<std::string>& command_names();
std::string command_help(const std::string& name);

// Validates the configuration, prints dimension estimates to `log`, throws
// FeasibilityError before allocating anything too large, then runs the checks.
Report run_command(const std::string& name, const ExperimentConfig& c, std::ostream& log);

// 0 pass, 1 check failure
int exit_code(const Report& r);

}  // namespace qdlab::cli
