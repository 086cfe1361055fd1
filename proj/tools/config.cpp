// config.cpp
#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "qdlab/errors.hpp"

namespace qdlab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string prefix(const std::string& where) { return where.empty() ? "" : where + ": "; }

double to_double(const std::string& v, const std::string& key, const std::string& where) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(prefix(where) + key + ": not a number '" + v + "'");
  return x;
}

long long to_integer(const std::string& v, const std::string& key, const std::string& where) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(prefix(where) + key + ": not an integer '" + v + "'");
  return x;
}

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

int ExperimentConfig::torus_side() const {
  if (lattice == "auto") return 0;
  if (lattice.rfind("torus:", 0) != 0) throw ConfigError("lattice: expected auto or torus:<N>, got '" + lattice + "'");
  const auto n = to_integer(lattice.substr(6), "lattice", "");
  if (n < 2) throw ConfigError("lattice: the torus side must be at least 2");
  return static_cast<int>(n);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"group", "lattice", "region", "split", "beta", "coupling",
                                                "rates", "n", "tol", "max-matvecs", "seed", "max-memory",
                                                "output", "csv", "timestamp"};
  return keys;
}

std::vector<double> parse_beta_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) throw ConfigError("beta: empty entry in '" + s + "'");
    out.push_back(to_double(tok, "beta", ""));
  }
  return out;
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value, const std::string& where) {
  const std::string v = trim(value);
  if (key == "group") {
    c.group = v;
  } else if (key == "lattice") {
    c.lattice = v;
  } else if (key == "region") {
    c.region = v;
  } else if (key == "split") {
    c.split = v;
  } else if (key == "beta") {
    try {
      c.betas = v.empty() ? std::vector<double>{} : parse_beta_list(v);
    } catch (const ConfigError& e) {
      throw ConfigError(prefix(where) + e.what());
    }
  } else if (key == "coupling") {
    c.coupling = v;
  } else if (key == "rates") {
    c.rates = v;
  } else if (key == "n") {
    c.n = static_cast<int>(to_integer(v, key, where));
  } else if (key == "tol") {
    c.tol = to_double(v, key, where);
  } else if (key == "max-matvecs") {
    c.max_matvecs = static_cast<long>(to_integer(v, key, where));
  } else if (key == "seed") {
    const auto s = to_integer(v, key, where);
    if (s < 0) throw ConfigError(prefix(where) + "seed: must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "max-memory") {
    c.max_memory_mb = to_double(v, key, where);
  } else if (key == "output") {
    c.output = v;
  } else if (key == "csv") {
    c.csv = v;
  } else if (key == "timestamp") {
    if (v == "true" || v == "1") c.timestamp = true;
    else if (v == "false" || v == "0") c.timestamp = false;
    else throw ConfigError(prefix(where) + "timestamp: expected true or false");
  } else {
    throw ConfigError(prefix(where) + "unknown key '" + key + "'");
  }
}

std::map<std::string, std::string> read_config_text(std::istream& in, const std::string& name) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  const auto& keys = config_keys();
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (out.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    ExperimentConfig probe;
    apply_setting(probe, key, line.substr(eq + 1), where);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return read_config_text(in, path);
}

void validate(const ExperimentConfig& c) {
  if (c.betas.empty()) throw ConfigError("beta: the list is empty");
  for (double b : c.betas)
    if (!(b >= 0) || b > 50) throw ConfigError("beta: values must lie in [0, 50], got " + fmt_double(b));
  c.torus_side();
  if (c.n < 1) throw ConfigError("n: must be at least 1");
  if (!(c.tol > 0) || c.tol > 1e-3) throw ConfigError("tol: must lie in (0, 1e-3]");
  if (c.max_matvecs < 1) throw ConfigError("max-matvecs: must be positive");
  if (!(c.max_memory_mb > 0)) throw ConfigError("max-memory: must be positive");
  if (c.coupling != "matrix-units") throw ConfigError("coupling: unknown set '" + c.coupling + "'");
  if (c.rates != "exponential-half" && c.rates.rfind("table:", 0) != 0)
    throw ConfigError("rates: expected exponential-half or table:<path>");
}

std::map<std::string, std::string> describe(const ExperimentConfig& c) {
  std::string betas;
  for (size_t i = 0; i < c.betas.size(); ++i) betas += (i ? "," : "") + fmt_double(c.betas[i]);
  return {{"group", c.group},
          {"lattice", c.lattice},
          {"region", c.region},
          {"split", c.split},
          {"beta", betas},
          {"coupling", c.coupling},
          {"rates", c.rates},
          {"n", std::to_string(c.n)},
          {"tol", fmt_double(c.tol)},
          {"max-matvecs", std::to_string(c.max_matvecs)},
          {"seed", std::to_string(c.seed)}};
}

}  // namespace qdlab::cli
