#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spatpomp/model.hpp"

namespace spatpomp::cli {

struct ModelConfig {
  std::string name;
  std::size_t units = 10;
  std::size_t times = 20;
  double dt = 1.0;
  /// Seed for the simulated bm data set.
  std::uint64_t data_seed = 1;
  std::string data_dir;
  /// Overrides of the data-generating parameters (bm only).
  std::map<std::string, double> truth;
};

struct MethodOptions {
  std::optional<std::size_t> Np, Ninter, Nguide, Lookahead, Nrep, block_size;
  std::optional<std::size_t> Ngirf, Nenkf, Nubf, Nparam, Nrep_per_param;
  std::optional<double> prop;
  std::string nbhd = "adjacent";
  std::optional<std::map<std::string, double>> rw_sd;
  double cooling = 0.5;
};

struct SweepConfig {
  std::vector<std::size_t> units;
  std::size_t replicates = 5;
  std::vector<std::string> methods;
  std::map<std::string, MethodOptions> options;
};

struct ProfileConfig {
  std::string parameter;
  std::vector<double> grid;
  std::map<std::string, double> lower, upper;
  std::size_t nprof = 1;
  std::string eval_method = "pfilter";
  MethodOptions eval_options;
  std::size_t eval_replicates = 1;
};

struct McapConfig {
  std::string input;
  std::string parameter;
  double level = 0.95;
  double span = 0.75;
};

struct ExperimentConfig {
  std::string command;
  ModelConfig model;
  std::string method;
  MethodOptions options;
  /// Overrides of the parameters used for filtering or as search start.
  std::map<std::string, double> params;
  std::size_t replicates = 1;
  std::size_t nsim = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output = ".";
  bool record_wall_time = false;
  std::optional<SweepConfig> sweep;
  std::optional<ProfileConfig> profile;
  std::optional<McapConfig> mcap;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

/// Parses and validates a JSON config for `command`. Every problem found is
/// reported in a single ValidationError.
ExperimentConfig parse_config(const std::string& json_text, const std::string& command,
                              const Overrides& overrides = {});

/// Builds the configured model. Unknown parameter overrides are rejected.
SpatPompModel build_model(const ModelConfig& config);
ParameterVector resolve_params(const SpatPompModel& model, const std::map<std::string, double>& overrides);

/// Each command writes its CSV files into config.output and returns their paths.
std::vector<std::string> cmd_simulate(const ExperimentConfig& config);
std::vector<std::string> cmd_filter(const ExperimentConfig& config);
std::vector<std::string> cmd_search(const ExperimentConfig& config);
std::vector<std::string> cmd_profile(const ExperimentConfig& config);
std::vector<std::string> cmd_mcap(const ExperimentConfig& config);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spatpomp::cli
