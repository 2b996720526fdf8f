#include "nlpgm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nlpgm {

void CheckReport::add(double residual, std::span<const double> point) {
  ++samples;
  // NaN counts as a violation.
  if (!(residual >= worst_residual)) worst_residual = std::isnan(residual) ? -INFINITY : residual;
  if ((std::isnan(residual) || residual < -tolerance) && witnesses.size() < kMaxWitnesses)
    witnesses.push_back({Vector(point.begin(), point.end()), residual});
}

void CheckReport::merge(const CheckReport& other) {
  samples += other.samples;
  worst_residual = std::min(worst_residual, other.worst_residual);
  precondition_failed = precondition_failed || other.precondition_failed;
  for (const auto& w : other.witnesses) {
    if (witnesses.size() >= kMaxWitnesses) break;
    witnesses.push_back(w);
  }
  if (!other.note.empty()) note += (note.empty() ? "" : "; ") + other.note;
}

bool CheckReport::passed() const {
  return !precondition_failed && samples > 0 && worst_residual >= -tolerance;
}

double RateCertificate::worst_slack() const {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < bound_series.size() && k < observed_series.size(); ++k) {
    const double s = bound_series[k] - observed_series[k];
    worst = std::isnan(s) ? -INFINITY : std::min(worst, s);
  }
  return worst;
}

RateCertificate certify_rate(std::string theorem, std::vector<double> bound_series,
                             std::vector<double> observed_series, double tolerance) {
  if (bound_series.size() != observed_series.size())
    throw std::invalid_argument("bound and observed series differ in length");
  RateCertificate c;
  c.theorem = std::move(theorem);
  c.bound_series = std::move(bound_series);
  c.observed_series = std::move(observed_series);
  c.tolerance = tolerance;
  c.satisfied = !c.bound_series.empty() && c.worst_slack() >= -tolerance;
  return c;
}

CheckReport to_report(const RateCertificate& cert) {
  CheckReport r(cert.theorem, cert.tolerance);
  for (std::size_t k = 0; k < cert.bound_series.size(); ++k) {
    const double kk = static_cast<double>(k);
    r.add(cert.bound_series[k] - cert.observed_series[k], std::span<const double>(&kk, 1));
  }
  return r;
}

// ---------------------------------------------------------------------------

double check_aniso_descent(const Problem& problem, const ReferenceFunction& ref, double L,
                           std::span<const double> x, std::span<const double> xbar) {
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  // L (x - yb) = L (x - xb) + u and L (xb - yb) = u with u = grad phi^*(grad f(xb)).
  const Vector u = ref.precond(problem.gradient(xbar));
  Vector shifted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = L * (x[i] - xbar[i]) + u[i];
  if (!ref.in_domain(shifted) || !ref.in_domain(u)) return std::numeric_limits<double>::infinity();
  const double rhs = problem.value(xbar) + (ref.value(shifted) - ref.value(u)) / L;
  return rhs - problem.value(x);
}

double check_precond_lipschitz(const Problem& problem, const ReferenceFunction& ref, double L,
                               std::span<const double> x, std::span<const double> xbar) {
  const Vector d = difference(ref.precond(problem.gradient(x)), ref.precond(problem.gradient(xbar)));
  return L * norm(difference(x, xbar)) - norm(d);
}

double check_noise_majorization(const ReferenceFunction& ref, std::span<const double> y,
                                std::span<const double> ybar) {
  if (ref.kernel().name != "cosh" || ref.scale() != 1.0)
    throw std::invalid_argument("noise majorization holds for the cosh kernel with scale 1 only");
  const Vector d = difference(ref.precond(y), ref.precond(ybar));
  return 0.5 * squared_norm(difference(y, ybar)) - ref.value(d);
}

double check_noise_majorization_tight(std::span<const double> x, std::span<const double> xbar) {
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  const double gap = phi.value(x) - phi.value(xbar);
  const double lhs = phi.value(difference(x, xbar)) + 0.5 * gap * gap;
  const double rhs = 0.5 * squared_norm(difference(phi.gradient(x), phi.gradient(xbar)));
  return rhs - lhs;
}

double check_grad_dominance(const Problem& problem, const ReferenceFunction& ref, double mu,
                            std::span<const double> x) {
  const auto f_star = problem.f_star();
  if (!f_star) throw std::invalid_argument("gradient dominance check needs a known f_star");
  return ref.stationarity(problem.gradient(x)) - mu * (problem.value(x) - *f_star);
}

// ---------------------------------------------------------------------------

double bound_thm22(double L, double gap, double alpha, double beta, std::size_t K) {
  if (!(beta >= 0.0 && beta < 0.5)) throw std::invalid_argument("beta must lie in [0, 0.5)");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  return L * gap / (alpha * static_cast<double>(K + 1) * (1.0 - 2.0 * beta));
}

double factor_thm24(double beta, double gamma, double mu) {
  if (!(beta > 0.0 && beta < 0.5)) throw std::invalid_argument("beta must lie in (0, 0.5)");
  if (!(gamma > 0.0) || !(mu > 0.0)) throw std::invalid_argument("gamma and mu must be positive");
  const double b2 = 2.0 * beta * beta;
  return std::max(1.0 - gamma * mu * (beta - b2), beta + b2);
}

double bound_thm27(double gap, double beta, double gamma, double phi_u0, std::size_t K) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  return (gap / (beta * gamma) + phi_u0 / (1.0 - beta)) / static_cast<double>(K);
}

namespace {

void check_stochastic_params(double gamma, std::size_t K, double sigma2) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma^2 must be nonnegative");
}

}  // namespace

double bound_thm31(double gap, double gamma, std::size_t K, double sigma2) {
  check_stochastic_params(gamma, K, sigma2);
  return gap / (gamma * static_cast<double>(K)) + sigma2;
}

double bound_thm34(double gap, double gamma, std::size_t K, double sigma2) {
  check_stochastic_params(gamma, K, sigma2);
  return (gap / gamma + 0.5 * sigma2) / static_cast<double>(K);
}

double bound_thm35(double gap, double gamma, double mu, double sigma2, std::size_t k) {
  const double gm = gamma * mu;
  if (!(gm > 0.0 && gm <= 1.0)) throw std::invalid_argument("gamma * mu must lie in (0, 1]");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma^2 must be nonnegative");
  return std::pow(1.0 - gm, static_cast<double>(k)) * gap + sigma2 / mu;
}

std::vector<double> series_thm35(double gap, double gamma, double mu, double sigma2,
                                 std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = bound_thm35(gap, gamma, mu, sigma2, k);
  return out;
}

CheckReport check_seq_lemma(std::span<const double> delta, double alpha, double theta) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (0, 2)");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  CheckReport report("seq_lemma", kInequalityTolerance);
  if (delta.empty()) return report;
  const double q = std::abs(1.0 - alpha);
  const double tail = theta / (1.0 - q);
  for (std::size_t k = 0; k < delta.size(); ++k) {
    if (delta[k] < 0.0) {
      report.precondition_failed = true;
      report.note = "negative delta at k=" + std::to_string(k);
      break;
    }
    if (k + 1 < delta.size()) {
      const double rhs = (1.0 - alpha) * delta[k] + theta;
      if (delta[k + 1] > rhs + 1e-12 * (1.0 + std::abs(rhs))) {
        report.precondition_failed = true;
        report.note = "recursion premise violated at k=" + std::to_string(k);
        break;
      }
    }
  }
  for (std::size_t k = 0; k < delta.size(); ++k) {
    const double bound = std::pow(q, static_cast<double>(k)) * delta[0] + tail;
    const double kk = static_cast<double>(k);
    report.add(bound - delta[k], std::span<const double>(&kk, 1));
  }
  return report;
}

double noise_level_estimate(const StochasticOracle& oracle, const ReferenceFunction& ref,
                            const std::vector<Vector>& xs, std::size_t batch, std::size_t draws,
                            std::uint64_t seed) {
  if (draws < 1) throw std::invalid_argument("draws must be >= 1");
  CounterRng rng(seed, Stream::check);
  double worst = 0.0;
  for (const Vector& x : xs) {
    const Vector u = ref.precond(oracle.problem().gradient(x));
    double sum = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
      const Vector v = ref.precond(oracle.sample(x, rng, batch));
      sum += ref.value(difference(u, v));
    }
    worst = std::max(worst, sum / static_cast<double>(draws));
  }
  return worst;
}

double gradient_variance_estimate(const StochasticOracle& oracle, std::span<const double> x,
                                  std::size_t batch, std::size_t draws, std::uint64_t seed) {
  if (draws < 1) throw std::invalid_argument("draws must be >= 1");
  CounterRng rng(seed, Stream::check);
  const Vector g = oracle.problem().gradient(x);
  double sum = 0.0;
  for (std::size_t d = 0; d < draws; ++d)
    sum += squared_norm(difference(oracle.sample(x, rng, batch), g));
  return sum / static_cast<double>(draws);
}

}  // namespace nlpgm
