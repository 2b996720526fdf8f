#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlpgm/kernels.hpp"
#include "nlpgm/linalg.hpp"
#include "nlpgm/problems.hpp"
#include "nlpgm/rng.hpp"

namespace nlpgm {

/// Iterate, momentum buffer and hyperparameters. `m` holds m^{k-1} before step k
/// (zero initially).
struct OptimizerState {
  Vector x;
  Vector m;
  std::uint64_t k = 0;
  double gamma = 1.0;
  double beta = 0.0;

  static OptimizerState start(Vector x0, double gamma, double beta = 0.0) {
    OptimizerState s;
    s.m.assign(x0.size(), 0.0);
    s.x = std::move(x0);
    s.gamma = gamma;
    s.beta = beta;
    return s;
  }
};

// Step functions are pure: state in, state out. They throw NonFiniteError when
// the (stochastic) gradient has a non-finite entry.

/// x' = x - gamma * grad phi^*(grad f(x))
OptimizerState npgm_step(OptimizerState s, const Problem& problem, const ReferenceFunction& ref);

/// m' = beta m + (1 - beta) grad phi^*(grad f(x)),  x' = x - gamma m'
OptimizerState mnpgm_step(OptimizerState s, const Problem& problem, const ReferenceFunction& ref);

/// x' = x - gamma * grad phi^*(g(x)) with g a minibatch gradient.
OptimizerState snpgm_step(OptimizerState s, const StochasticOracle& oracle,
                          const ReferenceFunction& ref, CounterRng& rng, std::size_t batch);

OptimizerState gd_step(OptimizerState s, const Problem& problem);

/// Heavy ball on raw gradients: m' = beta m + (1 - beta) grad f(x), x' = x - gamma m'.
OptimizerState gdm_step(OptimizerState s, const Problem& problem);

/// x' = x - min(gamma_clip, eta / ||g||) g; x unchanged when g = 0.
OptimizerState clipped_step(OptimizerState s, const StochasticOracle& oracle, double eta,
                            double gamma_clip, CounterRng& rng, std::size_t batch);

enum class Method { npgm, mnpgm, snpgm, gd, gdm, clipped };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);
bool is_stochastic(Method method);

struct RunSettings {
  Method method = Method::npgm;
  double gamma = 1.0;
  double beta = 0.0;
  std::size_t batch = 1;
  std::size_t iterations = 100;
  std::size_t eval_every = 1;
  double eta = 1.0;
  double gamma_clip = 1.0;
  bool timing = false;
};

struct TraceRecord {
  std::uint64_t k = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double stationarity = 0.0;
  std::optional<double> lyapunov;
  std::optional<std::int64_t> elapsed_ns;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  std::string config_echo;
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string abort_reason;
  Vector final_x;
};

/**
 * Executes `settings.iterations` steps from x0 and logs a record at every
 * k with k % eval_every == 0 and at the last iterate. Stochastic methods draw
 * minibatches from the sampling stream of `seed` and need `oracle`.
 *
 * The lyapunov column is gamma * phi(m^{k-1}) + f(x^k) - f_star when f_star
 * is known; gd and gdm measure their raw-gradient momentum with the quadratic
 * kernel, which is the reference they implicitly use.
 *
 * Aborts (recording the reason and the offending record) when f is not finite
 * or exceeds 1e12 * (1 + |f(x0)|).
 */
RunTrace run(const Problem& problem, const StochasticOracle* oracle, const ReferenceFunction& ref,
             const RunSettings& settings, Vector x0, std::uint64_t seed);

}  // namespace nlpgm
