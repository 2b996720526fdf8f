#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlpgm/linalg.hpp"
#include "nlpgm/optimizers.hpp"

namespace nlpgm {

/// Invalid configuration; key() names the offending entry (dotted path).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ProblemSpec {
  std::string name;  // selfcal_cosh, quadratic, noise_example, matrix_factorization, phase_retrieval
  std::size_t dim = 2;
  // matrix_factorization
  std::string source = "gaussian";  // gaussian | movielens
  std::string data_path;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;
  // phase_retrieval
  std::size_t n = 0;
  std::size_t m = 0;
  double noise_variance = 16.0;
  /// Seed of the data stream; the run seed when absent.
  std::optional<std::uint64_t> data_seed;

  bool operator==(const ProblemSpec&) const = default;
};

struct RefSpec {
  std::string kernel = "cosh";
  std::string shape = "isotropic";
  double scale = 1.0;
  double epsilon = 1.0;  // log_barrier only

  bool operator==(const RefSpec&) const = default;
};

struct InitSpec {
  std::string kind = "default";  // default | normal | point
  double mean = 0.0;
  double scale = 1.0;
  Vector x0;

  bool operator==(const InitSpec&) const = default;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::string method = "npgm";
  RefSpec ref;
  double gamma = 1.0;
  double beta = 0.0;
  std::size_t batch = 1;
  std::size_t iterations = 100;
  std::size_t eval_every = 1;
  double eta = 1.0;
  double gamma_clip = 1.0;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  InitSpec init;
  std::vector<std::string> certificates;  // thm22 | thm24 | thm27
  bool timing = false;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates JSON text. Defaults are resolved, so the result
/// carries every field explicitly.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config_text(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

/// Re-checks every constraint; throws ConfigError.
void validate(const ExperimentConfig& config);

RunSettings run_settings(const ExperimentConfig& config);

/// Sets a hyperparameter by key (gamma, beta, eta, gamma_clip, batch, ...);
/// used by sweeps. Throws ConfigError for keys that cannot be swept.
void set_hyperparameter(ExperimentConfig& config, const std::string& key, double value);

}  // namespace nlpgm
