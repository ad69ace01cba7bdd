#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ipgd/optimize.hpp"
#include "ipgd/problems.hpp"

namespace ipgd {

// Generator parameters for every family; unused fields are ignored by the
// families that do not need them.
struct ProblemConfig {
  ProblemKind kind = ProblemKind::matrix_sensing;
  int n1 = 20;
  int n2 = 20;
  int r = 3;
  int r_prime = 20;
  int n_measurements = 0;  // <= 0 picks the sensing default 10*n*r
  double p = 0.8;
  double lambda_balance = 0.25;
  Eigen::VectorXd sigma_star;  // empty selects (10, 5, 1) when r == 3
  int d = 150;        // sparse
  int n_samples = 300;  // sparse
  Eigen::VectorXd theta_star;  // sparse; empty selects the default signal
};

ProblemPtr build_problem(const ProblemConfig& cfg, std::uint64_t seed);

struct LoggingConfig {
  long long log_every = 1;
  long long hessian_every = 25;
};

struct ExperimentConfig {
  ProblemConfig problem;
  OptimizerConfig optimizer;
  LoggingConfig logging;
  std::uint64_t seed = 0;
  std::string out_dir;  // must be set by the config file or --out
  std::map<std::string, std::string> labels;
};

// Strict parser: unknown keys anywhere are an error naming the key.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Full echo with every default resolved (embedded in summaries).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct RunOutcome {
  bool diverged = false;
  std::string error;                // set when diverged
  std::vector<TraceRecord> trace;   // full, or partial when diverged
  std::optional<RunResult> result;  // set when not diverged
  double wall_seconds = 0.0;
};

// Build the problem from the config (seed stream 0), run the optimizer (seed
// stream 1) with a deviation sampler attached when the dimension allows dense
// Hessians, and return everything in memory.
RunOutcome execute_run(const ExperimentConfig& cfg, const Problem& problem);

// Write trace.csv under dir with the fixed 8-column schema, 17 significant
// digits, empty cells for unsampled deviation fields.
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);

// execute_run + artifacts (trace.csv, summary.json, problem.json) under
// cfg.out_dir. Returns the process exit code: 0 on success, 1 on divergence
// (partial trace still written).
int run_config(const ExperimentConfig& cfg);

// Named experiment bundles; see the README for what each one produces.
int run_preset(const std::string& name, std::uint64_t seed, const std::string& out_dir,
               const std::string& profile, std::ostream& log);

// Derivative/estimator gate for one family ("all" loops over every family).
// Prints a JSON report to `out`; returns nonzero when a gating check fails.
int verify_command(const std::string& family, std::uint64_t seed, std::ostream& out);

}  // namespace ipgd
