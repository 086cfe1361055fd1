// config.hpp
// Experiment configuration shared by all subcommands. Values come from a
// key = value file and from flags; both go through the same validation.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace qdlab::cli {

struct ExperimentConfig {
  std::string group = "Z2";
  std::string lattice = "auto";  // torus:<N>, or sized to fit the region
  std::string region;  // empty: whole torus
  std::string split;   // "cols:1,1"
  std::vector<double> betas{1.0};
  std::string coupling = "matrix-units";
  std::string rates = "exponential-half";  // or "table:<path>"
  int n = 2;                               // parent Hamiltonian order
  double tol = 1e-9;
  long max_matvecs = 20000;
  std::uint64_t seed = 1;
  double max_memory_mb = 3000;
  std::string output;  // JSON path, stdout when empty
  std::string csv;     // CSV path, derived from output when empty
  bool timestamp = true;

  // 0 for "auto"
  int torus_side() const;
};

// Keys accepted in files and as --<key> flags.
const std::vector<std::string>& config_keys();

// ConfigError for unknown keys or values that do not parse. `where` prefixes
// the message ("line 3").
void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value,
                   const std::string& where = "");

// '#' comments, blank lines ignored, one "key = value" per line.
std::map<std::string, std::string> read_config_text(std::istream& in, const std::string& name);
std::map<std::string, std::string> read_config_file(const std::string& path);

// Cross-field checks that do not depend on the subcommand.
void validate(const ExperimentConfig& c);

// Canonical key/value echo for reports.
std::map<std::string, std::string> describe(const ExperimentConfig& c);

std::vector<double> parse_beta_list(const std::string& s);

}  // namespace qdlab::cli
