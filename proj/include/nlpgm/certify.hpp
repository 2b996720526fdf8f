#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nlpgm/analysis.hpp"
#include "nlpgm/kernels.hpp"
#include "nlpgm/optimizers.hpp"

// Sampling certifiers behind `nlpgm verify`. Each returns CheckReports whose
// residuals follow the RHS - LHS convention of analysis.hpp.

namespace nlpgm {

/// Absolute tolerance for identities (inverse map, Fenchel-Young equality, ...).
inline constexpr double kIdentityTolerance = 1e-10;
/// Absolute slack for kernel-level inequalities.
inline constexpr double kKernelSlack = 1e-12;

/// quadratic, cosh, log_barrier(1), circular.
std::vector<Kernel> standard_kernels();

/// Copy of `kernel` whose dual map is shifted by `delta`. Used to confirm the
/// certifiers catch a broken conjugate.
Kernel perturb_dual_map(Kernel kernel, double delta);

/// t strictly inside dom h: N(0, s^2) with s in {0.1, 1, 2} (|t| <= 5 for
/// unbounded kernels), with a quarter of the draws hugging the boundary of
/// bounded kernels (|t| = r (1 - 10^-u), u in [1, 4]).
double sample_kernel_point(const Kernel& kernel, CounterRng& rng);

/// Coordinates N(0, s^2) with one s drawn per vector from `scales`.
Vector sample_vector(CounterRng& rng, std::size_t dim, std::span<const double> scales);

// --- kernels ------------------------------------------------------------------

CheckReport certify_inverse_map(const Kernel& kernel, std::size_t samples, std::uint64_t seed);
/// h(t) + h*(h'(t)) - t h'(t) = 0
CheckReport certify_fenchel_young_equality(const Kernel& kernel, std::size_t samples,
                                           std::uint64_t seed);
/// h(t) + h*(s) - t s >= 0 on random (t, s)
CheckReport certify_fenchel_young_pairs(const Kernel& kernel, std::size_t samples,
                                        std::uint64_t seed);
/// phi(grad phi^*(y)) = <grad phi^*(y), y> - phi^*(y)
CheckReport certify_conj_identity(const ReferenceFunction& ref, std::size_t samples,
                                  std::uint64_t seed);
/// phi(x) = phi(-x) and grad phi^*(-y) = -grad phi^*(y)
CheckReport certify_evenness(const ReferenceFunction& ref, std::size_t samples,
                             std::uint64_t seed);
/// phi(grad phi^*(y)) <= ||y||^2 / (2 mu_phi); equality for the quadratic kernel.
CheckReport certify_prop_e1(const ReferenceFunction& ref, std::size_t samples, std::uint64_t seed);
/// cosh: phi(grad phi^*(y)) >= ((sqrt(1 + b^2) - 1) / b^2) ||y||^2 for ||y|| <= b <= 10.
CheckReport certify_example_e2(std::size_t dim, std::size_t samples, std::uint64_t seed);
/// h(theta t) <= theta^2 h(t) on theta in {0, 0.01, ..., 1} times a t grid.
CheckReport certify_subhomogeneity(const Kernel& kernel);
/// phi(sum l_i x_i) <= c sum l_i phi(x_i), sum l_i <= 1, with c = 1 or, when
/// `subhomogeneous_form` is set, c = sum l_i.
CheckReport certify_subconvexity(const ReferenceFunction& ref, bool subhomogeneous_form,
                                 std::size_t samples, std::uint64_t seed);

// --- smoothness and noise -------------------------------------------------------

CheckReport certify_prop32(Shape shape, std::size_t samples, std::uint64_t seed);
CheckReport certify_prop32_tight(std::size_t samples, std::uint64_t seed);
/// Equality on selfcal_cosh at L = 1 when `equality`, else inequality at L.
CheckReport certify_aniso_descent_selfcal(std::size_t dim, double L, bool equality,
                                          std::size_t samples, std::uint64_t seed);
/// For every sampled pair passing at L1, checks every L2 in `larger`.
CheckReport certify_prop_b3(const Problem& problem, const ReferenceFunction& ref, double L1,
                            std::span<const double> larger, std::span<const double> scales,
                            std::size_t samples, std::uint64_t seed);
/// 1-D selfcal_cosh is (1,1)-smooth: the g/(1+|g|) map is 1-Lipschitz.
CheckReport certify_prop26(std::size_t samples, std::uint64_t seed);
CheckReport certify_grad_dominance_selfcal(std::size_t dim, std::size_t samples,
                                           std::uint64_t seed);
/// Relative error of the analytic gradient against central differences, 1e-5 allowed.
CheckReport certify_gradient(const Problem& problem, std::span<const double> center, double spread,
                             std::size_t samples, std::uint64_t seed);
/// Atom enumeration reproduces the full gradient; full-batch sampling is exact.
CheckReport certify_unbiasedness(const FiniteSumProblem& problem, std::span<const double> center,
                                 double spread, std::size_t samples, std::uint64_t seed);

// --- rates -------------------------------------------------------------------------

/// selfcal_cosh, dim 2, ||x0|| = 3: the starting point of the deterministic rate suites.
Vector rate_start_point();

RateCertificate certify_thm22_trace(const RunTrace& trace, double L, double alpha, double beta,
                                    double gap);
RateCertificate certify_thm24_trace(const RunTrace& trace, double beta, double gamma, double mu,
                                    double gap, double f_star);
/// V_{k+1} <= alpha V_k between consecutive records (relative residual).
CheckReport certify_thm24_lyapunov(const RunTrace& trace, double beta, double gamma, double mu);
RateCertificate certify_thm27_trace(const RunTrace& trace, double beta, double gamma, double gap,
                                    double phi_u0);

std::vector<CheckReport> certify_thm22(std::size_t K);
std::vector<CheckReport> certify_thm24(std::size_t K);
std::vector<CheckReport> certify_thm27(std::size_t K);

/// Noise example with the cosh reference: 30 seeds, gamma = 0.1, x0 = 10.
struct StochasticSetup {
  std::size_t seeds = 30;
  std::size_t iterations = 1000;
  double gamma = 0.1;
  double x0 = 10.0;
  std::size_t noise_draws = 10000;
  std::uint64_t seed = 0;
};

std::vector<CheckReport> certify_thm31(const StochasticSetup& setup);
std::vector<CheckReport> certify_thm34(const StochasticSetup& setup);
std::vector<CheckReport> certify_thm35(const StochasticSetup& setup);

/// Random admissible sequences for the sequence lemma.
CheckReport certify_seq_lemma(std::size_t sequences, std::uint64_t seed);

// --- registry --------------------------------------------------------------------

struct SuiteContext {
  std::uint64_t seed = 0;
  /// Kernels exercised by the kernel-level suites.
  std::vector<Kernel> kernels = standard_kernels();
};

/// Suite names accepted by run_suite, excluding the "all" alias.
const std::vector<std::string>& suite_names();

/// Runs one suite; "all" runs every suite. Throws std::invalid_argument for an
/// unknown name.
std::vector<CheckReport> run_suite(std::string_view name, const SuiteContext& context);

}  // namespace nlpgm
