#include "nlpgm/kernels.hpp"

#include <cmath>
#include <sstream>

namespace nlpgm {

Kernel quadratic_kernel() {
  Kernel k;
  k.name = "quadratic";
  k.eval = [](double t) { return 0.5 * t * t; };
  k.grad = [](double t) { return t; };
  k.conj = [](double s) { return 0.5 * s * s; };
  k.conj_grad = [](double s) { return s; };
  k.strong_convexity = 1.0;
  // Exactly 2-homogeneous.
  k.two_subhomogeneous = true;
  return k;
}

Kernel cosh_kernel() {
  Kernel k;
  k.name = "cosh";
  // cosh(t) - 1 = 2 sinh^2(t/2) avoids cancellation near 0.
  k.eval = [](double t) {
    const double s = std::sinh(0.5 * t);
    return 2.0 * s * s;
  };
  k.grad = [](double t) { return std::sinh(t); };
  k.conj = [](double s) {
    const double r = std::hypot(1.0, s);
    return s * std::asinh(s) - s * s / (r + 1.0);
  };
  k.conj_grad = [](double s) { return std::asinh(s); };
  k.strong_convexity = 1.0;
  k.two_subhomogeneous = true;
  return k;
}

Kernel log_barrier_kernel(double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("log_barrier: epsilon must be positive");
  Kernel k;
  k.name = "log_barrier";
  k.domain_radius = 1.0;
  k.eval = [epsilon](double t) {
    const double a = std::abs(t);
    return epsilon * (-a - std::log1p(-a));
  };
  k.grad = [epsilon](double t) { return epsilon * t / (1.0 - std::abs(t)); };
  k.conj = [epsilon](double s) {
    const double a = std::abs(s) / epsilon;
    return epsilon * (a - std::log1p(a));
  };
  k.conj_grad = [epsilon](double s) { return s / (epsilon + std::abs(s)); };
  k.strong_convexity = epsilon;
  k.two_subhomogeneous = true;
  return k;
}

Kernel circular_kernel() {
  Kernel k;
  k.name = "circular";
  k.domain_radius = 1.0;
  k.eval = [](double t) { return t * t / (1.0 + std::sqrt((1.0 - t) * (1.0 + t))); };
  k.grad = [](double t) { return t / std::sqrt((1.0 - t) * (1.0 + t)); };
  k.conj = [](double s) { return s * s / (1.0 + std::hypot(1.0, s)); };
  k.conj_grad = [](double s) { return s / std::hypot(1.0, s); };
  k.strong_convexity = 1.0;
  k.two_subhomogeneous = true;
  return k;
}

Kernel make_kernel(std::string_view name, std::span<const double> params) {
  if (name == "quadratic") return quadratic_kernel();
  if (name == "cosh") return cosh_kernel();
  if (name == "circular") return circular_kernel();
  if (name == "log_barrier") {
    const double eps = params.empty() ? 1.0 : params[0];
    return log_barrier_kernel(eps);
  }
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

std::string_view to_string(Shape shape) {
  return shape == Shape::isotropic ? "isotropic" : "separable";
}

Shape shape_from_string(std::string_view name) {
  if (name == "isotropic") return Shape::isotropic;
  if (name == "separable") return Shape::separable;
  throw std::invalid_argument("unknown shape '" + std::string(name) + "'");
}

ReferenceFunction::ReferenceFunction(Kernel kernel, Shape shape, double scale)
    : kernel_(std::move(kernel)), shape_(shape), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("reference function scale must be positive");
}

bool ReferenceFunction::in_domain(std::span<const double> x) const {
  if (shape_ == Shape::isotropic) return kernel_.in_domain(norm(x));
  for (double v : x)
    if (!kernel_.in_domain(v)) return false;
  return true;
}

namespace {

[[noreturn]] void throw_domain(const Kernel& k, double t) {
  std::ostringstream msg;
  msg << "argument " << t << " outside the domain of kernel " << k.name << " (radius "
      << k.domain_radius << ")";
  throw DomainError(msg.str());
}

}  // namespace

double ReferenceFunction::value(std::span<const double> x) const {
  if (shape_ == Shape::isotropic) {
    const double r = norm(x);
    if (!kernel_.in_domain(r)) throw_domain(kernel_, r);
    return scale_ * kernel_.eval(r);
  }
  double s = 0.0;
  for (double v : x) {
    if (!kernel_.in_domain(v)) throw_domain(kernel_, v);
    s += kernel_.eval(v);
  }
  return scale_ * s;
}

Vector ReferenceFunction::gradient(std::span<const double> x) const {
  Vector out(x.size(), 0.0);
  if (shape_ == Shape::isotropic) {
    const double r = norm(x);
    if (!kernel_.in_domain(r)) throw_domain(kernel_, r);
    if (r == 0.0) return out;
    const double c = scale_ * kernel_.grad(r) / r;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
    return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!kernel_.in_domain(x[i])) throw_domain(kernel_, x[i]);
    out[i] = scale_ * kernel_.grad(x[i]);
  }
  return out;
}

// phi = lambda * psi  =>  phi^*(y) = lambda * psi^*(y / lambda).
double ReferenceFunction::conj_value(std::span<const double> y) const {
  if (shape_ == Shape::isotropic) return scale_ * kernel_.conj(norm(y) / scale_);
  double s = 0.0;
  for (double v : y) s += kernel_.conj(v / scale_);
  return scale_ * s;
}

void ReferenceFunction::precond_into(std::span<const double> y, std::span<double> out) const {
  if (shape_ == Shape::isotropic) {
    const double r = norm(y);
    if (r == 0.0) {
      for (double& v : out) v = 0.0;
      return;
    }
    const double c = kernel_.conj_grad(r / scale_) / r;
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = c * y[i];
    return;
  }
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = kernel_.conj_grad(y[i] / scale_);
}

Vector ReferenceFunction::precond(std::span<const double> y) const {
  Vector out(y.size());
  precond_into(y, out);
  return out;
}

double ReferenceFunction::stationarity(std::span<const double> g) const {
  return value(precond(g));
}

double ReferenceFunction::episcale_value(double c, std::span<const double> x) const {
  if (!(c > 0.0)) throw std::invalid_argument("episcaling factor must be positive");
  return c * value(scaled(x, 1.0 / c));
}

}  // namespace nlpgm
