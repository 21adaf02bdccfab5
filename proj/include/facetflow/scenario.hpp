#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facetflow/torus_grid.hpp"

namespace facetflow {

/// Library version string.
const char* version();

/// Flat `key = value` configuration with dotted section keys. Blank lines and
/// text after '#' are ignored. Lists are whitespace separated.
class Config {
 public:
  /// Throws ConfigError (with the line number) on malformed lines or
  /// duplicate keys.
  static Config parse(const std::string& text);
  /// Throws ConfigError when the file cannot be read.
  static Config load(const std::string& path);

  /// Canonical text: one `key = value` line per entry, keys sorted.
  std::string serialize() const;

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::string& raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

enum class KeyType { string, integer, u64, real, real_list };

/// One documented configuration key.
struct KeySpec {
  std::string key;
  KeyType type;
  std::string fallback;                 // default value as text; empty = none
  std::vector<std::string> choices;     // allowed values for strings
  double min = -1e300;
  double max = 1e300;
  std::string doc;
};

/// Keys accepted by a scenario kind (common keys included). Throws
/// ConfigError for an unknown kind.
const std::vector<KeySpec>& scenario_schema(const std::string& kind);
const std::vector<std::string>& scenario_kinds();

/// Fills defaults and validates types, ranges and choices. Throws ConfigError
/// naming the first offending key, including unknown keys.
Config validate(const Config& cfg);

struct ScenarioTemplate {
  std::string name;
  std::string description;
  std::string text;  // config file contents
};

const std::vector<ScenarioTemplate>& scenario_catalog();

struct CheckResult {
  std::string name;
  std::string relation;  // "<=", ">=", "within", "true"
  double measured = 0.0;
  double target = 0.0;
  double bound = 0.0;
  /// Positive when passed: bound - measured, measured - bound or
  /// tolerance - |measured - target|.
  double margin = 0.0;
  bool passed = false;
  std::string note;
};

/// Names of the checks a validated config will execute, in order.
std::vector<std::string> declared_checks(const Config& validated);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 schema error, 3 numerical failure, 4 check failure
  std::string status;
  std::string error;
  std::string out_dir;
  std::vector<CheckResult> checks;
  std::vector<std::string> artifacts;
};

/// Validates and runs one scenario, writing manifest.json, timing.json,
/// tables and grid snapshots into the output directory. Never throws for
/// scenario errors; they are mapped to exit codes.
RunResult run_scenario(const Config& cfg, const RunOptions& options = {});
RunResult run_scenario_file(const std::string& path, const RunOptions& options = {});

/// `%.17g` formatting used by every writer.
std::string format_double(double v);

/// Grid snapshot text: "FACETFLOW-GRID v1", "n=<dim> N=<N> t=<t>", then one
/// line of N values per grid row.
std::string format_grid(const GridFunction& u, double t);

struct GridFile {
  GridFunction u;
  double time = 0.0;
};

/// Parses format_grid output; throws ConfigError on malformed files.
GridFile read_grid(const std::string& path);

}  // namespace facetflow
