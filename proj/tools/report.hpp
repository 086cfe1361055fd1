// report.hpp
// Run reports: a "checks" array plus free-form results, written as JSON with
// a CSV mirror of the checks.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace qdlab::cli {

using Json = nlohmann::ordered_json;

struct Check {
  std::string name;
  double bound = 0;
  double measured = 0;
  bool pass = false;
  std::string method;
  std::uint64_t seed = 0;
};

struct Report {
  std::string command;
  Json config = Json::object();
  Json estimates = Json::object();
  std::vector<Check> checks;
  Json results = Json::array();

  bool pass() const;
  void add(std::string name, double bound, double measured, bool pass, std::string method, std::uint64_t seed);
};

// Everything except the header is a function of the report contents.
Json to_json(const Report& r, const std::string& timestamp);
std::string to_csv(const Report& r);
// Fixed-width table of the checks.
void print_summary(const Report& r, std::ostream& os);

// ISO 8601, UTC
std::string utc_timestamp();

}  // namespace qdlab::cli
