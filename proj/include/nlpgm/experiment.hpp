#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlpgm/analysis.hpp"
#include "nlpgm/config.hpp"
#include "nlpgm/kernels.hpp"
#include "nlpgm/optimizers.hpp"
#include "nlpgm/problems.hpp"

namespace nlpgm {

inline constexpr const char* kTraceHeader = "k,f,grad_norm,stationarity,lyapunov,elapsed_ns";

/// %.17g, which round-trips every double.
std::string format_double(double v);

struct BuiltProblem {
  std::shared_ptr<const Problem> problem;
  /// Set for finite-sum problems.
  std::shared_ptr<const StochasticOracle> oracle;
};

BuiltProblem build_problem(const ProblemSpec& spec, std::uint64_t run_seed);
ReferenceFunction build_reference(const RefSpec& spec);

/// Starting point from the init stream of `seed`. Defaults: N(0, 1) per
/// coordinate, N(0, 1/r) for matrix factorization, N(5, 0.5) for phase retrieval.
Vector initial_point(const ExperimentConfig& config, const Problem& problem, std::uint64_t seed);

void write_trace_csv(const RunTrace& trace, std::ostream& out);

struct RunOutcome {
  std::uint64_t seed = 0;
  std::filesystem::path csv;
  RunTrace trace;
  std::vector<CheckReport> certificates;
  /// Non-empty when the run threw.
  std::string error;

  bool ok() const;
};

/// One seed: builds the problem, runs, evaluates the requested certificates.
/// Never throws for run-time failures; they land in `error`.
RunOutcome execute_run(const ExperimentConfig& config, std::uint64_t seed);

struct CommandOptions {
  std::optional<std::filesystem::path> out;
  std::size_t jobs = 1;
  std::uint64_t seed_offset = 0;
};

/// Writes trace_seed<s>.csv per seed, config.json and summary.json into the
/// output directory. Returns the process exit status (0 iff all runs completed
/// and all certificates passed).
int cmd_run(const ExperimentConfig& config, const CommandOptions& options, std::ostream& log);

struct GridAxis {
  std::string key;
  std::vector<double> values;
};

/// "gamma=5,1,0.5" -> {gamma, {5, 1, 0.5}}. Throws std::invalid_argument.
GridAxis parse_grid_axis(const std::string& text);

/// Cross product of the axes; each point runs every seed into point_<i>/.
/// summary.json ranks points by mean final f. Throws std::invalid_argument
/// for an empty grid.
int cmd_sweep(const ExperimentConfig& config, const std::vector<GridAxis>& grid,
              const CommandOptions& options, std::ostream& log);

struct VerifyOptions {
  std::filesystem::path out = "verify-report";
  std::uint64_t seed = 0;
  /// Shifts every kernel's dual map; a non-zero value must make verify fail.
  double perturb_dual = 0.0;
};

/// One line per report in report.txt plus summary.json; exit status 1 iff a
/// report failed. Throws std::invalid_argument for unknown suites.
int cmd_verify(const std::vector<std::string>& suites, const VerifyOptions& options,
               std::ostream& log);

/// Formats a report as one line: PASS|FAIL name samples worst_residual tolerance.
std::string report_line(const CheckReport& report);

/// Prints shape and nonzero count of a MovieLens file as JSON.
int cmd_ingest_movielens(const std::filesystem::path& path, std::ostream& out);

}  // namespace nlpgm
