#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nlpgm/kernels.hpp"
#include "nlpgm/linalg.hpp"
#include "nlpgm/problems.hpp"

namespace nlpgm {

/// Default slack for sampled inequalities.
inline constexpr double kInequalityTolerance = 1e-9;

struct Witness {
  Vector point;
  double residual = 0.0;
};

/**
 * Outcome of a sampled inequality check. Each sample contributes the residual
 * RHS - LHS; worst_residual is the minimum over samples. Identity checks feed
 * -|LHS - RHS| so the same pass rule applies: worst_residual >= -tolerance.
 */
struct CheckReport {
  std::string name;
  std::size_t samples = 0;
  double worst_residual = std::numeric_limits<double>::infinity();
  double tolerance = kInequalityTolerance;
  std::vector<Witness> witnesses;
  bool precondition_failed = false;
  std::string note;

  static constexpr std::size_t kMaxWitnesses = 8;

  CheckReport() = default;
  CheckReport(std::string n, double tol) : name(std::move(n)), tolerance(tol) {}

  void add(double residual, std::span<const double> point);
  /// Folds another report's samples into this one.
  void merge(const CheckReport& other);
  bool passed() const;
};

struct RateCertificate {
  std::string theorem;
  std::vector<double> bound_series;
  std::vector<double> observed_series;
  double tolerance = kInequalityTolerance;
  bool satisfied = false;

  /// min_k (bound_k - observed_k)
  double worst_slack() const;
};

/// satisfied <=> observed_k <= bound_k + tolerance for every k.
RateCertificate certify_rate(std::string theorem, std::vector<double> bound_series,
                             std::vector<double> observed_series,
                             double tolerance = kInequalityTolerance);

CheckReport to_report(const RateCertificate& cert);

// --- pointwise residuals (RHS - LHS) ---------------------------------------

/**
 * Anisotropic descent inequality
 *   f(x) <= f(xb) + (1/L) * phi(L (x - yb)) - (1/L) * phi(L (xb - yb)),
 *   yb = xb - (1/L) grad phi^*(grad f(xb)).
 * Returns +inf when an episcaled argument leaves dom phi (vacuous case).
 */
double check_aniso_descent(const Problem& problem, const ReferenceFunction& ref, double L,
                           std::span<const double> x, std::span<const double> xbar);

/// L ||x - xb|| - ||grad phi^*(grad f(x)) - grad phi^*(grad f(xb))||
double check_precond_lipschitz(const Problem& problem, const ReferenceFunction& ref, double L,
                               std::span<const double> x, std::span<const double> xbar);

/// 0.5 ||y - yb||^2 - phi(grad phi^*(y) - grad phi^*(yb)); cosh kernel with
/// scale 1 only (isotropic or separable), else std::invalid_argument.
double check_noise_majorization(const ReferenceFunction& ref, std::span<const double> y,
                                std::span<const double> ybar);

/// Tighter isotropic form with phi = cosh(||.||) - 1:
///   0.5 ||grad phi(x) - grad phi(xb)||^2 - [phi(x - xb) + 0.5 (phi(x) - phi(xb))^2]
double check_noise_majorization_tight(std::span<const double> x, std::span<const double> xbar);

/// phi(grad phi^*(grad f(x))) - mu (f(x) - f_star); needs a known f_star.
double check_grad_dominance(const Problem& problem, const ReferenceFunction& ref, double mu,
                            std::span<const double> x);

// --- rate bounds -------------------------------------------------------------

/// L (f(x0) - f_star) / (alpha (K + 1) (1 - 2 beta)), beta in [0, 0.5), alpha in (0, 1].
double bound_thm22(double L, double gap, double alpha, double beta, std::size_t K);

/// max{1 - gamma mu (beta - 2 beta^2), beta + 2 beta^2}, beta in (0, 0.5).
double factor_thm24(double beta, double gamma, double mu);

/// (1/K) ((f(x0) - f_star) / (beta gamma) + phi(u^0) / (1 - beta)), beta in (0, 1), K >= 1.
double bound_thm27(double gap, double beta, double gamma, double phi_u0, std::size_t K);

/// (f(x0) - f_star) / (gamma K) + sigma^2
double bound_thm31(double gap, double gamma, std::size_t K, double sigma2);

/// (1/K) ((f(x0) - f_star) / gamma + sigma^2 / 2)
double bound_thm34(double gap, double gamma, std::size_t K, double sigma2);

/// (1 - gamma mu)^k gap + sigma^2 / mu, gamma mu in (0, 1].
double bound_thm35(double gap, double gamma, double mu, double sigma2, std::size_t k);
std::vector<double> series_thm35(double gap, double gamma, double mu, double sigma2,
                                 std::size_t count);

/**
 * Checks delta_k <= |1 - alpha|^k delta_0 + theta / (1 - |1 - alpha|) for all k,
 * given delta_{k+1} <= (1 - alpha) delta_k + theta. A violated premise sets
 * precondition_failed instead of reporting a violation.
 */
CheckReport check_seq_lemma(std::span<const double> delta, double alpha, double theta);

/**
 * Monte-Carlo estimate of max_x E[phi(grad phi^*(grad f(x)) - grad phi^*(g(x)))]
 * over the points `xs`, with `draws` oracle calls per point.
 */
double noise_level_estimate(const StochasticOracle& oracle, const ReferenceFunction& ref,
                            const std::vector<Vector>& xs, std::size_t batch, std::size_t draws,
                            std::uint64_t seed);

/// Empirical E||g(x) - grad f(x)||^2 at one point.
double gradient_variance_estimate(const StochasticOracle& oracle, std::span<const double> x,
                                  std::size_t batch, std::size_t draws, std::uint64_t seed);

}  // namespace nlpgm
