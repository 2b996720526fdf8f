#pragma once

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nlpgm/linalg.hpp"

namespace nlpgm {

/// Raised when a reference function is evaluated outside its domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/**
 * Scalar convex kernel h together with its convex conjugate.
 *
 * Every shipped kernel is even, strictly convex, satisfies h(0) = 0 and has a
 * dual map conj_grad = (h')^{-1} defined on the whole real line. Kernels with
 * a bounded domain are finite on the open interval (-domain_radius,
 * domain_radius) only.
 */
struct Kernel {
  std::string name;
  double domain_radius = std::numeric_limits<double>::infinity();
  std::function<double(double)> eval;
  std::function<double(double)> grad;
  std::function<double(double)> conj;
  std::function<double(double)> conj_grad;
  /// Lower bound on h''.
  double strong_convexity = 0.0;
  bool two_subhomogeneous = false;

  bool in_domain(double t) const { return std::abs(t) < domain_radius; }
};

Kernel quadratic_kernel();
Kernel cosh_kernel();
/// h(t) = eps * (-|t| - ln(1 - |t|)) on (-1, 1).
Kernel log_barrier_kernel(double epsilon);
/// h(t) = 1 - sqrt(1 - t^2) on (-1, 1).
Kernel circular_kernel();

/// Builds a kernel by name: quadratic, cosh, log_barrier (params = {eps}), circular.
/// Throws std::invalid_argument for unknown names or eps <= 0.
Kernel make_kernel(std::string_view name, std::span<const double> params = {});

enum class Shape { isotropic, separable };

std::string_view to_string(Shape shape);
Shape shape_from_string(std::string_view name);

/**
 * Reference function phi = scale * (h o ||.||) or scale * sum_i h(x_i).
 *
 * Immutable after construction. The dual map precond() is grad phi^*, the
 * nonlinear preconditioner applied to gradients by the optimizers.
 */
class ReferenceFunction {
 public:
  ReferenceFunction(Kernel kernel, Shape shape, double scale = 1.0);

  const Kernel& kernel() const { return kernel_; }
  Shape shape() const { return shape_; }
  double scale() const { return scale_; }

  bool in_domain(std::span<const double> x) const;

  /// phi(x); throws DomainError outside the domain.
  double value(std::span<const double> x) const;
  Vector gradient(std::span<const double> x) const;

  /// phi^*(y).
  double conj_value(std::span<const double> y) const;

  /// grad phi^*(y). Zero vector at y = 0.
  Vector precond(std::span<const double> y) const;
  void precond_into(std::span<const double> y, std::span<double> out) const;

  /// phi(grad phi^*(g)).
  double stationarity(std::span<const double> g) const;

  /// (c * phi)(x / c) for c > 0.
  double episcale_value(double c, std::span<const double> x) const;

  /// Strong convexity modulus of phi (scale times the kernel's).
  double strong_convexity() const { return scale_ * kernel_.strong_convexity; }

  bool two_subhomogeneous() const { return kernel_.two_subhomogeneous; }

 private:
  Kernel kernel_;
  Shape shape_;
  double scale_;
};

}  // namespace nlpgm
