// report.cpp
#include "report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace qdlab::cli {

namespace {

// JSON has no inf/nan
Json number(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string g17(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

bool Report::pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

void Report::add(std::string name, double bound, double measured, bool pass, std::string method, std::uint64_t seed) {
  checks.push_back({std::move(name), bound, measured, pass, std::move(method), seed});
}

Json to_json(const Report& r, const std::string& timestamp) {
  Json j;
  j["header"] = {{"tool", "qdlab"}, {"format", 1}, {"timestamp", timestamp}};
  j["command"] = r.command;
  j["config"] = r.config;
  j["estimates"] = r.estimates;
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"bound", number(c.bound)},
                      {"measured", number(c.measured)},
                      {"pass", c.pass},
                      {"method", c.method},
                      {"seed", c.seed}});
  j["checks"] = checks;
  j["results"] = r.results;
  j["pass"] = r.pass();
  return j;
}

std::string to_csv(const Report& r) {
  std::ostringstream os;
  os << "command,name,bound,measured,pass,method,seed\n";
  for (const auto& c : r.checks)
    os << r.command << ',' << csv_field(c.name) << ',' << g17(c.bound) << ',' << g17(c.measured) << ','
       << (c.pass ? "true" : "false") << ',' << csv_field(c.method) << ',' << c.seed << '\n';
  return os.str();
}

void print_summary(const Report& r, std::ostream& os) {
  size_t w = 5;
  for (const auto& c : r.checks) w = std::max(w, c.name.size());
  os << std::left << std::setw(static_cast<int>(w)) << "check" << "  " << std::setw(13) << "measured" << "  "
     << std::setw(13) << "bound" << "  result\n";
  for (const auto& c : r.checks)
    os << std::left << std::setw(static_cast<int>(w)) << c.name << "  " << std::setw(13) << std::setprecision(6)
       << c.measured << "  " << std::setw(13) << c.bound << "  " << (c.pass ? "PASS" : "FAIL") << '\n';
  os << r.command << ": " << (r.pass() ? "PASS" : "FAIL") << " (" << r.checks.size() << " checks)\n";
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace qdlab::cli
