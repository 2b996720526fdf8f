#include "nlpgm/certify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

namespace nlpgm {

namespace {

constexpr std::array<double, 3> kWideScales{0.1, 1.0, 10.0};
constexpr std::array<double, 2> kNarrowScales{0.1, 1.0};

std::size_t pick(CounterRng& rng, std::size_t n) { return rng.below(n); }

double rel(double residual, double magnitude) { return residual / std::max(1.0, magnitude); }

std::string tagged(std::string base, std::string_view tag) {
  return base + "[" + std::string(tag) + "]";
}

std::string ref_tag(const ReferenceFunction& ref) {
  std::string tag = ref.kernel().name + "," + std::string(to_string(ref.shape()));
  if (ref.scale() != 1.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",scale=%g", ref.scale());
    tag += buf;
  }
  return tag;
}

}  // namespace

std::vector<Kernel> standard_kernels() {
  return {quadratic_kernel(), cosh_kernel(), log_barrier_kernel(1.0), circular_kernel()};
}

Kernel perturb_dual_map(Kernel kernel, double delta) {
  auto base = kernel.conj_grad;
  kernel.conj_grad = [base, delta](double s) { return base(s) + delta; };
  kernel.name += "~perturbed";
  return kernel;
}

double sample_kernel_point(const Kernel& kernel, CounterRng& rng) {
  const double r = kernel.domain_radius;
  if (std::isfinite(r)) {
    if (rng.uniform() < 0.25) {
      const double u = 1.0 + 3.0 * rng.uniform();
      const double t = r * (1.0 - std::pow(10.0, -u));
      return rng.uniform() < 0.5 ? -t : t;
    }
    for (;;) {
      const double t = r * (2.0 * rng.uniform() - 1.0);
      if (kernel.in_domain(t)) return t;
    }
  }
  constexpr std::array<double, 3> scales{0.1, 1.0, 2.0};
  for (;;) {
    const double t = scales[pick(rng, scales.size())] * rng.normal();
    if (std::abs(t) <= 5.0) return t;
  }
}

Vector sample_vector(CounterRng& rng, std::size_t dim, std::span<const double> scales) {
  const double s = scales[pick(rng, scales.size())];
  Vector v(dim);
  for (double& x : v) x = s * rng.normal();
  return v;
}

// ---------------------------------------------------------------------------

CheckReport certify_inverse_map(const Kernel& kernel, std::size_t samples, std::uint64_t seed) {
  CheckReport report(tagged("inverse_map", kernel.name), kIdentityTolerance);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = sample_kernel_point(kernel, rng);
    report.add(-std::abs(kernel.conj_grad(kernel.grad(t)) - t), std::span<const double>(&t, 1));
  }
  return report;
}

CheckReport certify_fenchel_young_equality(const Kernel& kernel, std::size_t samples,
                                           std::uint64_t seed) {
  CheckReport report(tagged("fenchel_young_equality", kernel.name), kIdentityTolerance);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = sample_kernel_point(kernel, rng);
    const double s = kernel.grad(t);
    report.add(-std::abs(kernel.eval(t) + kernel.conj(s) - t * s),
               std::span<const double>(&t, 1));
  }
  return report;
}

CheckReport certify_fenchel_young_pairs(const Kernel& kernel, std::size_t samples,
                                        std::uint64_t seed) {
  CheckReport report(tagged("fenchel_young_pairs", kernel.name), kKernelSlack);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = sample_kernel_point(kernel, rng);
    const double s = kWideScales[pick(rng, kWideScales.size())] * rng.normal();
    const std::array<double, 2> point{t, s};
    report.add(kernel.eval(t) + kernel.conj(s) - t * s, point);
  }
  return report;
}

CheckReport certify_conj_identity(const ReferenceFunction& ref, std::size_t samples,
                                  std::uint64_t seed) {
  CheckReport report(tagged("conj_identity", ref_tag(ref)), kIdentityTolerance);
  CounterRng rng(seed, Stream::check);
  constexpr std::array<std::size_t, 3> dims{1, 2, 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector y = scaled(sample_vector(rng, dims[pick(rng, dims.size())], kWideScales),
                            ref.scale());
    const Vector u = ref.precond(y);
    report.add(-std::abs(ref.value(u) - (dot(u, y) - ref.conj_value(y))), y);
  }
  return report;
}

CheckReport certify_evenness(const ReferenceFunction& ref, std::size_t samples,
                             std::uint64_t seed) {
  CheckReport report(tagged("evenness", ref_tag(ref)), kIdentityTolerance);
  CounterRng rng(seed, Stream::check);
  constexpr std::array<std::size_t, 3> dims{1, 2, 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector y = sample_vector(rng, dims[pick(rng, dims.size())], kWideScales);
    const Vector u = ref.precond(y);
    const Vector u_neg = ref.precond(scaled(y, -1.0));
    double err = std::abs(ref.value(u) - ref.value(scaled(u, -1.0)));
    for (std::size_t j = 0; j < u.size(); ++j) err = std::max(err, std::abs(u[j] + u_neg[j]));
    report.add(-err, y);
  }
  return report;
}

CheckReport certify_prop_e1(const ReferenceFunction& ref, std::size_t samples, std::uint64_t seed) {
  const bool equality = ref.kernel().name == "quadratic";
  CheckReport report(tagged(equality ? "prop_e1_equality" : "prop_e1", ref_tag(ref)),
                     kKernelSlack);
  const double mu = ref.strong_convexity();
  CounterRng rng(seed, Stream::check);
  constexpr std::array<std::size_t, 3> dims{1, 2, 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector y = sample_vector(rng, dims[pick(rng, dims.size())], kWideScales);
    const double rhs = squared_norm(y) / (2.0 * mu);
    const double lhs = ref.stationarity(y);
    report.add(equality ? -rel(std::abs(rhs - lhs), rhs) : rel(rhs - lhs, rhs), y);
  }
  return report;
}

CheckReport certify_example_e2(std::size_t dim, std::size_t samples, std::uint64_t seed) {
  CheckReport report(tagged("example_e2", "dim=" + std::to_string(dim)), kKernelSlack);
  const ReferenceFunction phi(cosh_kernel(), dim == 1 ? Shape::separable : Shape::isotropic);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const double b = 10.0 * (1.0 - rng.uniform());  // (0, 10]
    Vector y = sample_vector(rng, dim, kNarrowScales);
    const double n = norm(y);
    if (n == 0.0) continue;
    const double target = rng.uniform() < 0.1 ? b : b * rng.uniform();
    y = scaled(y, target / n);
    const double c = (std::sqrt(1.0 + b * b) - 1.0) / (b * b);
    Vector point = y;
    point.push_back(b);
    report.add(phi.stationarity(y) - c * squared_norm(y), point);
  }
  return report;
}

CheckReport certify_subhomogeneity(const Kernel& kernel) {
  CheckReport report(tagged("subhomogeneity", kernel.name), kKernelSlack);
  if (!kernel.two_subhomogeneous) {
    report.precondition_failed = true;
    report.note = "kernel is not flagged 2-subhomogeneous";
    return report;
  }
  std::vector<double> ts;
  const double r = kernel.domain_radius;
  if (std::isfinite(r)) {
    for (int i = -400; i <= 400; ++i) ts.push_back(r * 0.999 * i / 400.0);
    for (int u = 3; u <= 8; ++u) {
      ts.push_back(r * (1.0 - std::pow(10.0, -u)));
      ts.push_back(-r * (1.0 - std::pow(10.0, -u)));
    }
  } else {
    for (int i = -400; i <= 400; ++i) ts.push_back(10.0 * i / 400.0);
  }
  for (int j = 0; j <= 100; ++j) {
    const double theta = j / 100.0;
    for (double t : ts) {
      const double rhs = theta * theta * kernel.eval(t);
      const std::array<double, 2> point{theta, t};
      report.add(rel(rhs - kernel.eval(theta * t), rhs), point);
    }
  }
  return report;
}

CheckReport certify_subconvexity(const ReferenceFunction& ref, bool subhomogeneous_form,
                                 std::size_t samples, std::uint64_t seed) {
  CheckReport report(tagged(subhomogeneous_form ? "subconvexity_subhomogeneous" : "subconvexity",
                            ref_tag(ref)),
                     kKernelSlack);
  if (subhomogeneous_form && !ref.two_subhomogeneous()) {
    report.precondition_failed = true;
    report.note = "reference is not 2-subhomogeneous";
    return report;
  }
  CounterRng rng(seed, Stream::check);
  constexpr std::array<std::size_t, 3> dims{1, 2, 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t dim = dims[pick(rng, dims.size())];
    const std::size_t d = 2 + pick(rng, 3);
    std::vector<double> lambda(d);
    double total = 0.0;
    for (double& l : lambda) total += (l = rng.uniform());
    const double target = rng.uniform() < 0.1 ? 1.0 : 1.0 - rng.uniform();
    for (double& l : lambda) l *= target / total;
    double sum_l = 0.0;
    for (double l : lambda) sum_l += l;
    Vector combo(dim, 0.0);
    double rhs = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      // points in dom phi through the dual map
      const Vector x = ref.precond(sample_vector(rng, dim, kWideScales));
      axpy(lambda[j], x, combo);
      rhs += lambda[j] * ref.value(x);
    }
    if (subhomogeneous_form) rhs *= sum_l;
    report.add(rel(rhs - ref.value(combo), rhs), combo);
  }
  return report;
}

// ---------------------------------------------------------------------------

CheckReport certify_prop32(Shape shape, std::size_t samples, std::uint64_t seed) {
  const ReferenceFunction phi(cosh_kernel(), shape);
  CheckReport report(tagged("prop32", to_string(shape)), kKernelSlack);
  CounterRng rng(seed, Stream::check);
  const std::array<std::size_t, 3> dims =
      shape == Shape::isotropic ? std::array<std::size_t, 3>{2, 3, 5}
                                : std::array<std::size_t, 3>{1, 2, 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t dim = dims[pick(rng, dims.size())];
    const Vector y = sample_vector(rng, dim, kWideScales);
    const Vector yb = sample_vector(rng, dim, kWideScales);
    Vector point = y;
    point.insert(point.end(), yb.begin(), yb.end());
    report.add(check_noise_majorization(phi, y, yb), point);
  }
  return report;
}

CheckReport certify_prop32_tight(std::size_t samples, std::uint64_t seed) {
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  CheckReport report("prop32_tight", kKernelSlack);
  CounterRng rng(seed, Stream::check);
  constexpr std::array<std::size_t, 3> dims{2, 3, 5};
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t dim = dims[pick(rng, dims.size())];
    const Vector x = phi.precond(sample_vector(rng, dim, kWideScales));
    const Vector xb = phi.precond(sample_vector(rng, dim, kWideScales));
    Vector point = x;
    point.insert(point.end(), xb.begin(), xb.end());
    report.add(check_noise_majorization_tight(x, xb), point);
  }
  return report;
}

CheckReport certify_aniso_descent_selfcal(std::size_t dim, double L, bool equality,
                                          std::size_t samples, std::uint64_t seed) {
  char tag[64];
  std::snprintf(tag, sizeof tag, "dim=%zu,L=%g", dim, L);
  CheckReport report(tagged(equality ? "aniso_descent_equality" : "aniso_descent", tag),
                     kInequalityTolerance);
  const SelfCalCosh f(dim);
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector x = sample_vector(rng, dim, kNarrowScales);
    const Vector xb = sample_vector(rng, dim, kNarrowScales);
    const double r = check_aniso_descent(f, phi, L, x, xb);
    Vector point = x;
    point.insert(point.end(), xb.begin(), xb.end());
    report.add(equality ? -std::abs(r) : r, point);
  }
  return report;
}

CheckReport certify_prop_b3(const Problem& problem, const ReferenceFunction& ref, double L1,
                            std::span<const double> larger, std::span<const double> scales,
                            std::size_t samples, std::uint64_t seed) {
  char tag[64];
  std::snprintf(tag, sizeof tag, "%s,L1=%g", problem.name().c_str(), L1);
  CheckReport report(tagged("prop_b3", tag), kInequalityTolerance);
  CounterRng rng(seed, Stream::check);
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector x = sample_vector(rng, problem.dim(), scales);
    const Vector xb = sample_vector(rng, problem.dim(), scales);
    if (check_aniso_descent(problem, ref, L1, x, xb) < -kInequalityTolerance) {
      ++skipped;
      continue;
    }
    Vector point = x;
    point.insert(point.end(), xb.begin(), xb.end());
    for (double L2 : larger) report.add(check_aniso_descent(problem, ref, L2, x, xb), point);
  }
  if (skipped > 0) report.note = std::to_string(skipped) + " pairs failed at L1 and were skipped";
  return report;
}

CheckReport certify_prop26(std::size_t samples, std::uint64_t seed) {
  CheckReport report("prop26", kInequalityTolerance);
  const SelfCalCosh f(1);
  const ReferenceFunction ngd(log_barrier_kernel(1.0), Shape::isotropic);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector x = sample_vector(rng, 1, kWideScales);
    const Vector xb = sample_vector(rng, 1, kWideScales);
    const std::array<double, 2> point{x[0], xb[0]};
    report.add(check_precond_lipschitz(f, ngd, 1.0, x, xb), point);
  }
  return report;
}

CheckReport certify_grad_dominance_selfcal(std::size_t dim, std::size_t samples,
                                           std::uint64_t seed) {
  CheckReport report(tagged("grad_dominance", "selfcal_cosh,dim=" + std::to_string(dim)),
                     kInequalityTolerance);
  const SelfCalCosh f(dim);
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector x = sample_vector(rng, dim, kNarrowScales);
    report.add(-std::abs(check_grad_dominance(f, phi, 1.0, x)), x);
  }
  return report;
}

CheckReport certify_gradient(const Problem& problem, std::span<const double> center, double spread,
                             std::size_t samples, std::uint64_t seed) {
  CheckReport report(tagged("gradient", problem.name()), 0.0);
  CounterRng rng(seed, Stream::check);
  for (std::size_t i = 0; i < samples; ++i) {
    Vector x(center.begin(), center.end());
    for (double& v : x) v += spread * rng.normal();
    const Vector g = problem.gradient(x);
    const Vector fd = finite_diff_grad(problem, x, 1e-6 * (1.0 + norm(x)));
    const double err = norm(difference(g, fd)) / std::max(1.0, norm(g));
    report.add(1e-5 - err, x);
  }
  return report;
}

CheckReport certify_unbiasedness(const FiniteSumProblem& problem, std::span<const double> center,
                                 double spread, std::size_t samples, std::uint64_t seed) {
  CheckReport report(tagged("unbiasedness", problem.name()), kKernelSlack);
  CounterRng rng(seed, Stream::check);
  const std::size_t n = problem.atom_count();
  for (std::size_t i = 0; i < samples; ++i) {
    Vector x(center.begin(), center.end());
    for (double& v : x) v += spread * rng.normal();
    const Vector g = problem.gradient(x);
    Vector mean(problem.dim(), 0.0);
    for (std::size_t a = 0; a < n; ++a) axpy(1.0 / static_cast<double>(n), problem.atom_gradient(a, x), mean);
    double residual = -norm(difference(mean, g)) / std::max(1.0, norm(g));
    if (problem.sampling() == Sampling::without_replacement) {
      CounterRng draw(seed + i, Stream::sampling);
      if (problem.sample(x, draw, n) != g) residual = -1.0;
    }
    report.add(residual, x);
  }
  return report;
}

// ---------------------------------------------------------------------------

Vector rate_start_point() { return {1.8, 2.4}; }

namespace {

RunTrace run_selfcal(Method method, double gamma, double beta, std::size_t K) {
  const SelfCalCosh f(2);
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  RunSettings s;
  s.method = method;
  s.gamma = gamma;
  s.beta = beta;
  s.iterations = K;
  s.eval_every = 1;
  return run(f, nullptr, phi, s, rate_start_point(), 0);
}

std::string param_tag(const char* a, double va, const char* b, double vb) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%g,%s=%g", a, va, b, vb);
  return buf;
}

}  // namespace

RateCertificate certify_thm22_trace(const RunTrace& trace, double L, double alpha, double beta,
                                    double gap) {
  std::vector<double> bound, observed;
  double running = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) {
    running = std::min(running, r.stationarity);
    observed.push_back(running);
    bound.push_back(bound_thm22(L, gap, alpha, beta, r.k));
  }
  return certify_rate("thm22", std::move(bound), std::move(observed));
}

RateCertificate certify_thm24_trace(const RunTrace& trace, double beta, double gamma, double mu,
                                    double gap, double f_star) {
  const double alpha = factor_thm24(beta, gamma, mu);
  std::vector<double> bound, observed;
  for (const auto& r : trace.records) {
    observed.push_back(r.f - f_star);
    bound.push_back(std::pow(alpha, static_cast<double>(r.k)) * gap);
  }
  return certify_rate("thm24", std::move(bound), std::move(observed));
}

CheckReport certify_thm24_lyapunov(const RunTrace& trace, double beta, double gamma, double mu) {
  const double alpha = factor_thm24(beta, gamma, mu);
  CheckReport report("thm24_lyapunov", kInequalityTolerance);
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const auto& a = trace.records[i];
    const auto& b = trace.records[i + 1];
    if (!a.lyapunov || !b.lyapunov) {
      report.precondition_failed = true;
      report.note = "trace has no lyapunov column";
      break;
    }
    if (b.k != a.k + 1) {
      report.precondition_failed = true;
      report.note = "records are not consecutive";
      break;
    }
    // below this the iterate has converged to working precision
    if (*a.lyapunov < 1e-200) break;
    const double kk = static_cast<double>(a.k);
    report.add((alpha * *a.lyapunov - *b.lyapunov) / *a.lyapunov, std::span<const double>(&kk, 1));
  }
  return report;
}

RateCertificate certify_thm27_trace(const RunTrace& trace, double beta, double gamma, double gap,
                                    double phi_u0) {
  std::vector<double> bound, observed;
  double running = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) {
    if (r.k == 0) continue;
    running = std::min(running, r.stationarity);
    observed.push_back(running);
    bound.push_back(bound_thm27(gap, beta, gamma, phi_u0, r.k));
  }
  return certify_rate("thm27", std::move(bound), std::move(observed));
}

std::vector<CheckReport> certify_thm22(std::size_t K) {
  std::vector<CheckReport> out;
  const double gap = SelfCalCosh(2).value(rate_start_point());
  for (double beta : {0.0, 0.1, 0.25, 0.4}) {
    for (double alpha : {0.5, 1.0}) {
      const RunTrace trace = run_selfcal(Method::mnpgm, alpha, beta, K);
      CheckReport r = to_report(certify_thm22_trace(trace, 1.0, alpha, beta, gap));
      r.name = tagged("thm22", param_tag("beta", beta, "alpha", alpha));
      if (trace.aborted) {
        r.precondition_failed = true;
        r.note = trace.abort_reason;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<CheckReport> certify_thm24(std::size_t K) {
  std::vector<CheckReport> out;
  const double gap = SelfCalCosh(2).value(rate_start_point());
  for (double beta : {0.1, 0.25, 0.4}) {
    for (double gamma : {0.5, 1.0}) {
      const RunTrace trace = run_selfcal(Method::mnpgm, gamma, beta, K);
      CheckReport r = to_report(certify_thm24_trace(trace, beta, gamma, 1.0, gap, 0.0));
      r.name = tagged("thm24", param_tag("beta", beta, "gamma", gamma));
      out.push_back(std::move(r));
      CheckReport v = certify_thm24_lyapunov(trace, beta, gamma, 1.0);
      v.name = tagged("thm24_lyapunov", param_tag("beta", beta, "gamma", gamma));
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<CheckReport> certify_thm27(std::size_t K) {
  std::vector<CheckReport> out;
  const SelfCalCosh f(2);
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  const Vector x0 = rate_start_point();
  const double gap = f.value(x0);
  const double phi_u0 = phi.stationarity(f.gradient(x0));
  for (double beta : {0.1, 0.5, 0.9}) {
    const double gamma = (1.0 - beta) * (1.0 - beta);  // L = 1
    const RunTrace trace = run_selfcal(Method::mnpgm, gamma, beta, K);
    CheckReport r = to_report(certify_thm27_trace(trace, beta, gamma, gap, phi_u0));
    char tag[32];
    std::snprintf(tag, sizeof tag, "beta=%g", beta);
    r.name = tagged("thm27", tag);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SeedRuns {
  // [seed][record]
  std::vector<std::vector<double>> stationarity;
  std::vector<std::vector<double>> suboptimality;
  double lo = 0.0, hi = 0.0;
  double gap = 0.0;
  bool aborted = false;
};

SeedRuns noise_example_runs(const StochasticSetup& setup, std::size_t batch) {
  const auto f = make_noise_example();
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  RunSettings s;
  s.method = Method::snpgm;
  s.gamma = setup.gamma;
  s.batch = batch;
  s.iterations = setup.iterations;
  s.eval_every = 1;
  SeedRuns out;
  out.gap = f->value(Vector{setup.x0}) - *f->f_star();
  out.lo = out.hi = setup.x0;
  for (std::size_t i = 0; i < setup.seeds; ++i) {
    const std::uint64_t seed = setup.seed + i;
    RunTrace trace = run(*f, f.get(), phi, s, Vector{setup.x0}, seed);
    out.aborted = out.aborted || trace.aborted;
    std::vector<double> st, sub;
    for (const auto& r : trace.records) {
      st.push_back(r.stationarity);
      sub.push_back(r.f - *f->f_star());
      // |f'| = 3 |x + 1| pins the iterate up to reflection about -1
      const double x = r.grad_norm / 3.0;
      out.lo = std::min(out.lo, -1.0 - x);
      out.hi = std::max(out.hi, -1.0 + x);
    }
    out.stationarity.push_back(std::move(st));
    out.suboptimality.push_back(std::move(sub));
  }
  return out;
}

std::vector<Vector> grid(double lo, double hi, std::size_t n, std::initializer_list<double> extra) {
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < n; ++i)
    xs.push_back({lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)});
  for (double e : extra) xs.push_back({e});
  return xs;
}

struct MeanSe {
  double mean, se;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {m, sd / std::sqrt(n)};
}

CheckReport step_precondition(const StochasticSetup& setup, const std::string& name) {
  CheckReport r(name + "_stepsize", 0.0);
  const double L = *NoiseExample().aniso_constant();
  const double slack = 1.0 / L - setup.gamma;
  r.add(slack, std::span<const double>(&setup.gamma, 1));
  return r;
}

}  // namespace

std::vector<CheckReport> certify_thm31(const StochasticSetup& setup) {
  const SeedRuns runs = noise_example_runs(setup, 1);
  const auto f = make_noise_example();
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  const double sigma2 = noise_level_estimate(*f, phi, grid(runs.lo, runs.hi, 201, {-1.0}), 1,
                                             setup.noise_draws, setup.seed);
  std::vector<double> bound, observed;
  for (std::size_t K = 1; K <= setup.iterations; ++K) {
    std::vector<double> avgs;
    for (const auto& st : runs.stationarity) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += st[k];
      avgs.push_back(s / static_cast<double>(K));
    }
    const MeanSe ms = mean_se(avgs);
    observed.push_back(ms.mean);
    bound.push_back(bound_thm31(runs.gap, setup.gamma, K, sigma2) + 3.0 * ms.se);
  }
  CheckReport r = to_report(certify_rate("thm31", bound, observed));
  char note[96];
  std::snprintf(note, sizeof note, "sigma2=%.6g over x in [%.4g, %.4g]", sigma2, runs.lo, runs.hi);
  r.note = note;
  r.precondition_failed = runs.aborted;
  return {step_precondition(setup, "thm31"), r};
}

std::vector<CheckReport> certify_thm34(const StochasticSetup& setup) {
  const std::size_t K = setup.iterations;
  const auto f = make_noise_example();
  const SeedRuns runs = noise_example_runs(setup, K);

  // premise: E||g - grad f||^2 <= sigma^2 / K at batch K, with the 1/batch scaling checked
  CheckReport premise("thm34_variance_scaling", 0.0);
  const std::size_t draws = 2000;
  const double allowed = 5.0 * std::sqrt(2.0 / static_cast<double>(draws));
  for (double x : {-1.0, 0.0, 5.0, 10.0}) {
    const Vector xv{x};
    const double v1 = gradient_variance_estimate(*f, xv, 1, draws, setup.seed);
    for (std::size_t b : {std::size_t{10}, std::size_t{100}, K}) {
      const double vb = gradient_variance_estimate(*f, xv, b, draws, setup.seed + b);
      const double ratio = static_cast<double>(b) * vb / v1;
      const std::array<double, 2> point{x, static_cast<double>(b)};
      premise.add(allowed - std::abs(ratio - 1.0), point);
    }
  }
  double var_k = 0.0;
  for (const Vector& x : grid(runs.lo, runs.hi, 21, {-1.0}))
    var_k = std::max(var_k, gradient_variance_estimate(*f, x, K, 500, setup.seed));
  const double sigma2 = static_cast<double>(K) * var_k * (1.0 + 3.0 * std::sqrt(2.0 / 500.0));

  std::vector<double> avgs;
  for (const auto& st : runs.stationarity) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += st[k];
    avgs.push_back(s / static_cast<double>(K));
  }
  const MeanSe ms = mean_se(avgs);
  CheckReport r = to_report(certify_rate(
      "thm34", {bound_thm34(runs.gap, setup.gamma, K, sigma2) + 3.0 * ms.se}, {ms.mean}));
  char note[64];
  std::snprintf(note, sizeof note, "sigma2=%.6g", sigma2);
  r.note = note;
  r.precondition_failed = runs.aborted;
  return {step_precondition(setup, "thm34"), premise, r};
}

std::vector<CheckReport> certify_thm35(const StochasticSetup& setup) {
  const SeedRuns runs = noise_example_runs(setup, 1);
  const auto f = make_noise_example();
  const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
  const double sigma2 = noise_level_estimate(*f, phi, grid(runs.lo, runs.hi, 201, {-1.0}), 1,
                                             setup.noise_draws, setup.seed);
  double mu = std::numeric_limits<double>::infinity();
  for (const Vector& x : grid(runs.lo, runs.hi, 401, {})) {
    const double sub = f->value(x) - *f->f_star();
    if (sub < 1e-12) continue;
    mu = std::min(mu, phi.stationarity(f->gradient(x)) / sub);
  }
  const std::size_t count = runs.suboptimality.front().size();
  std::vector<double> bound = series_thm35(runs.gap, setup.gamma, mu, sigma2, count);
  std::vector<double> observed(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> col;
    for (const auto& sub : runs.suboptimality) col.push_back(sub[k]);
    const MeanSe ms = mean_se(col);
    observed[k] = ms.mean;
    bound[k] += 3.0 * ms.se;
  }
  CheckReport r = to_report(certify_rate("thm35", bound, observed));
  char note[96];
  std::snprintf(note, sizeof note, "mu=%.6g sigma2=%.6g", mu, sigma2);
  r.note = note;
  r.precondition_failed = runs.aborted;
  return {step_precondition(setup, "thm35"), r};
}

CheckReport certify_seq_lemma(std::size_t sequences, std::uint64_t seed) {
  CheckReport total("seq_lemma", kInequalityTolerance);
  CounterRng rng(seed, Stream::check);
  for (std::size_t s = 0; s < sequences; ++s) {
    const double alpha = 0.05 + 1.9 * rng.uniform();
    const double theta = 0.01 + 10.0 * rng.uniform();
    std::vector<double> delta;
    if (s % 10 == 0) {
      delta.assign(50, theta / alpha);
    } else {
      delta.push_back(100.0 * rng.uniform());
      const bool tight = rng.uniform() < 0.3;
      for (int k = 0; k < 200; ++k) {
        const double rhs = (1.0 - alpha) * delta.back() + theta;
        if (rhs < 0.0) break;
        delta.push_back(tight ? rhs : rhs * rng.uniform());
      }
    }
    total.merge(check_seq_lemma(delta, alpha, theta));
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

using Suite = std::function<std::vector<CheckReport>(const SuiteContext&)>;

std::vector<ReferenceFunction> refs_of(const SuiteContext& ctx, std::initializer_list<double> scales) {
  std::vector<ReferenceFunction> refs;
  for (const Kernel& k : ctx.kernels)
    for (Shape shape : {Shape::isotropic, Shape::separable})
      for (double scale : scales) refs.emplace_back(k, shape, scale);
  return refs;
}

const std::vector<std::pair<std::string, Suite>>& registry() {
  static const std::vector<std::pair<std::string, Suite>> suites = {
      {"inverse_map",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const Kernel& k : c.kernels) out.push_back(certify_inverse_map(k, 1000, c.seed));
         return out;
       }},
      {"fenchel_young",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const Kernel& k : c.kernels) {
           out.push_back(certify_fenchel_young_equality(k, 1000, c.seed));
           out.push_back(certify_fenchel_young_pairs(k, 1000, c.seed));
         }
         return out;
       }},
      {"conj_identity",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const auto& ref : refs_of(c, {1.0, 100.0}))
           out.push_back(certify_conj_identity(ref, 1000, c.seed));
         return out;
       }},
      {"evenness",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const auto& ref : refs_of(c, {1.0})) out.push_back(certify_evenness(ref, 1000, c.seed));
         return out;
       }},
      {"prop_e1",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const auto& ref : refs_of(c, {1.0})) out.push_back(certify_prop_e1(ref, 10000, c.seed));
         return out;
       }},
      {"example_e2",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (std::size_t dim : {1, 2, 3}) out.push_back(certify_example_e2(dim, 10000, c.seed));
         return out;
       }},
      {"subhomogeneity",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const Kernel& k : c.kernels)
           if (k.name != "quadratic") out.push_back(certify_subhomogeneity(k));
         return out;
       }},
      {"subconvexity",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (const auto& ref : refs_of(c, {1.0})) {
           out.push_back(certify_subconvexity(ref, false, 10000, c.seed));
           out.push_back(certify_subconvexity(ref, true, 10000, c.seed));
         }
         return out;
       }},
      {"prop32",
       [](const SuiteContext& c) {
         return std::vector<CheckReport>{certify_prop32(Shape::isotropic, 100000, c.seed),
                                         certify_prop32(Shape::separable, 100000, c.seed)};
       }},
      {"prop32_tight",
       [](const SuiteContext& c) {
         return std::vector<CheckReport>{certify_prop32_tight(100000, c.seed)};
       }},
      {"aniso_descent",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (std::size_t dim : {1, 2, 5}) {
           out.push_back(certify_aniso_descent_selfcal(dim, 1.0, true, 1000, c.seed));
           out.push_back(certify_aniso_descent_selfcal(dim, 2.0, false, 1000, c.seed));
         }
         return out;
       }},
      {"prop_b3",
       [](const SuiteContext& c) {
         const ReferenceFunction phi(cosh_kernel(), Shape::isotropic);
         const std::array<double, 4> larger_self{1.5, 2.0, 4.0, 10.0};
         const std::array<double, 3> larger_noise{4.0, 6.0, 30.0};
         return std::vector<CheckReport>{
             certify_prop_b3(SelfCalCosh(3), phi, 1.0, larger_self, kNarrowScales, 1000, c.seed),
             certify_prop_b3(NoiseExample(), phi, 3.0, larger_noise, kNarrowScales, 1000, c.seed)};
       }},
      {"prop26",
       [](const SuiteContext& c) { return std::vector<CheckReport>{certify_prop26(10000, c.seed)}; }},
      {"grad_dominance",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         for (std::size_t dim : {1, 2, 5}) out.push_back(certify_grad_dominance_selfcal(dim, 1000, c.seed));
         // classical PL with equality: quadratic kernel, f = 0.5 ||x||^2
         CheckReport pl("grad_dominance[quadratic]", kInequalityTolerance);
         const Quadratic q(3);
         const ReferenceFunction quad(quadratic_kernel(), Shape::isotropic);
         CounterRng rng(c.seed, Stream::check);
         for (int i = 0; i < 1000; ++i) {
           const Vector x = sample_vector(rng, 3, kWideScales);
           pl.add(-std::abs(check_grad_dominance(q, quad, 1.0, x)), x);
         }
         out.push_back(std::move(pl));
         return out;
       }},
      {"gradients",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         out.push_back(certify_gradient(SelfCalCosh(3), Vector(3, 0.0), 1.0, 100, c.seed));
         out.push_back(certify_gradient(Quadratic(4), Vector(4, 0.0), 1.0, 100, c.seed));
         out.push_back(certify_gradient(NoiseExample(), Vector{0.0}, 10.0, 100, c.seed));
         const auto mf = make_matrix_factorization(gaussian_matrix(6, 5, c.seed), 2);
         out.push_back(certify_gradient(*mf, Vector(mf->dim(), 0.0), 1.0, 100, c.seed));
         const auto pr = make_phase_retrieval(10, 8, c.seed);
         out.push_back(certify_gradient(*pr, Vector(10, 5.0), std::sqrt(0.5), 100, c.seed));
         return out;
       }},
      {"unbiasedness",
       [](const SuiteContext& c) {
         std::vector<CheckReport> out;
         out.push_back(certify_unbiasedness(NoiseExample(), Vector{0.0}, 10.0, 100, c.seed));
         const auto pr = make_phase_retrieval(10, 8, c.seed);
         out.push_back(certify_unbiasedness(*pr, Vector(10, 5.0), std::sqrt(0.5), 100, c.seed));
         return out;
       }},
      {"thm22", [](const SuiteContext&) { return certify_thm22(10000); }},
      {"thm24", [](const SuiteContext&) { return certify_thm24(1000); }},
      {"thm27", [](const SuiteContext&) { return certify_thm27(1000); }},
      {"thm31",
       [](const SuiteContext& c) {
         StochasticSetup s;
         s.seed = c.seed;
         return certify_thm31(s);
       }},
      {"thm34",
       [](const SuiteContext& c) {
         StochasticSetup s;
         s.seed = c.seed;
         return certify_thm34(s);
       }},
      {"thm35",
       [](const SuiteContext& c) {
         StochasticSetup s;
         s.seed = c.seed;
         return certify_thm35(s);
       }},
      {"seq_lemma",
       [](const SuiteContext& c) { return std::vector<CheckReport>{certify_seq_lemma(1000, c.seed)}; }},
  };
  return suites;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<CheckReport> run_suite(std::string_view name, const SuiteContext& context) {
  if (name == "all") {
    std::vector<CheckReport> out;
    for (const auto& [n, fn] : registry()) {
      auto part = fn(context);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  for (const auto& [n, fn] : registry())
    if (n == name) return fn(context);
  throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
}

}  // namespace nlpgm
