// main.cpp
// qdlab: experiment runner. Exit codes: 0 pass, 1 check failure, 2 usage or
// configuration error, 3 infeasible size.
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"
#include "qdlab/errors.hpp"

using namespace qdlab;
using namespace qdlab::cli;

namespace {

std::string csv_path(const ExperimentConfig& c) {
  if (!c.csv.empty()) return c.csv;
  if (c.output.empty()) return "";
  const auto dot = c.output.rfind('.');
  const auto slash = c.output.rfind('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? c.output.substr(0, dot) : c.output) + ".csv";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdlab: quantum double thermal state and Davies generator checks"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_path;
  std::map<std::string, bool> no_timestamp;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, command_help(name));
    subs[name] = sub;
    sub->add_option("--config", config_path[name], "key = value file; flags override it");
    for (const auto& key : config_keys()) {
      if (key == "timestamp") continue;
      sub->add_option("--" + key, flags[name][key]);
    }
    sub->add_flag("--no-timestamp", no_timestamp[name], "empty timestamp in the report header");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string name;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) name = n;

  ExperimentConfig cfg;
  try {
    if (!config_path[name].empty())
      for (const auto& [k, v] : read_config_file(config_path[name])) apply_setting(cfg, k, v, config_path[name]);
    for (const auto& key : config_keys()) {
      if (key == "timestamp") continue;
      if (subs[name]->count("--" + key) > 0) apply_setting(cfg, key, flags[name][key], "--" + key);
    }
    if (no_timestamp[name]) cfg.timestamp = false;
    validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "qdlab " << name << ": " << e.what() << '\n';
    return 2;
  }

  try {
    Report r = run_command(name, cfg, std::cerr);
    const Json j = to_json(r, cfg.timestamp ? utc_timestamp() : "");
    const std::string text = j.dump(2) + "\n";
    if (cfg.output.empty()) {
      std::cout << text;
      print_summary(r, std::cerr);
    } else {
      write_file(cfg.output, text);
      print_summary(r, std::cout);
    }
    if (const auto path = csv_path(cfg); !path.empty()) write_file(path, to_csv(r));
    return exit_code(r);
  } catch (const FeasibilityError& e) {
    std::cerr << "qdlab " << name << ": infeasible: " << e.what() << '\n';
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "qdlab " << name << ": solver did not converge: " << e.what() << " (residual " << e.residual
              << ")\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "qdlab " << name << ": " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "qdlab " << name << ": " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "qdlab " << name << ": " << e.what() << '\n';
    return 2;
  }
}
