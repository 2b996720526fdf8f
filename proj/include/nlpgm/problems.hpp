#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "nlpgm/linalg.hpp"
#include "nlpgm/rng.hpp"

namespace nlpgm {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic value/gradient oracle for min_x f(x).
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient_into(std::span<const double> x, std::span<double> out) const = 0;

  Vector gradient(std::span<const double> x) const {
    Vector g(dim());
    gradient_into(x, g);
    return g;
  }

  /// Known infimum, if any.
  virtual std::optional<double> f_star() const { return std::nullopt; }
  /// Anisotropic smoothness constant relative to the problem's declared reference.
  virtual std::optional<double> aniso_constant() const { return std::nullopt; }
  /// Anisotropic gradient dominance constant relative to the declared reference.
  virtual std::optional<double> dominance_constant() const { return std::nullopt; }
};

/// Stochastic first-order oracle g(x) for an underlying problem.
class StochasticOracle {
 public:
  virtual ~StochasticOracle() = default;
  virtual const Problem& problem() const = 0;
  /// Minibatch gradient built from `batch` draws.
  virtual Vector sample(std::span<const double> x, CounterRng& rng, std::size_t batch) const = 0;
};

/// Oracle that always returns the exact gradient.
class ExactOracle final : public StochasticOracle {
 public:
  explicit ExactOracle(std::shared_ptr<const Problem> problem) : problem_(std::move(problem)) {}
  const Problem& problem() const override { return *problem_; }
  Vector sample(std::span<const double> x, CounterRng&, std::size_t) const override {
    return problem_->gradient(x);
  }

 private:
  std::shared_ptr<const Problem> problem_;
};

enum class Sampling {
  with_replacement,     // i.i.d. uniform atoms
  without_replacement,  // uniform subset, reshuffled per call
};

/**
 * f = (1/N) sum_i f_i with uniform atom probabilities, doubling as its own
 * stochastic oracle. A without-replacement batch of size >= N is the full
 * gradient and is returned through gradient_into() so that it matches the
 * deterministic path bit for bit.
 */
class FiniteSumProblem : public Problem, public StochasticOracle {
 public:
  virtual std::size_t atom_count() const = 0;
  /// out += weight * grad f_i(x)
  virtual void add_atom_gradient(std::size_t i, std::span<const double> x, double weight,
                                 std::span<double> out) const = 0;
  virtual Sampling sampling() const = 0;

  const Problem& problem() const override { return *this; }
  Vector sample(std::span<const double> x, CounterRng& rng, std::size_t batch) const override;
  Vector atom_gradient(std::size_t i, std::span<const double> x) const;
};

/// f(x) = cosh(||x||) - 1: anisotropically smooth with L = 1 and gradient
/// dominant with mu = 1 relative to the cosh isotropic reference (scale 1).
class SelfCalCosh final : public Problem {
 public:
  explicit SelfCalCosh(std::size_t dim);
  std::string name() const override { return "selfcal_cosh"; }
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> x) const override;
  void gradient_into(std::span<const double> x, std::span<double> out) const override;
  std::optional<double> f_star() const override { return 0.0; }
  std::optional<double> aniso_constant() const override { return 1.0; }
  std::optional<double> dominance_constant() const override { return 1.0; }

 private:
  std::size_t dim_;
};

/// f(x) = 0.5 * ||x||^2.
class Quadratic final : public Problem {
 public:
  explicit Quadratic(std::size_t dim) : dim_(dim) {}
  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> x) const override { return 0.5 * squared_norm(x); }
  void gradient_into(std::span<const double> x, std::span<double> out) const override {
    std::copy(x.begin(), x.end(), out.begin());
  }
  std::optional<double> f_star() const override { return 0.0; }

 private:
  std::size_t dim_;
};

/// f(x) = 0.5 * [(x - 1)^2 + 2 (x + 2)^2] as the mean of f_1 = (x - 1)^2 and
/// f_2 = 2 (x + 2)^2, each atom drawn with probability 1/2.
class NoiseExample final : public FiniteSumProblem {
 public:
  std::string name() const override { return "noise_example"; }
  std::size_t dim() const override { return 1; }
  double value(std::span<const double> x) const override;
  void gradient_into(std::span<const double> x, std::span<double> out) const override;
  std::optional<double> f_star() const override { return 3.0; }
  /// Relative to cosh (isotropic, scale 1): f'' = 3 <= 3 sqrt(1 + f'^2).
  std::optional<double> aniso_constant() const override { return 3.0; }

  std::size_t atom_count() const override { return 2; }
  void add_atom_gradient(std::size_t i, std::span<const double> x, double weight,
                         std::span<double> out) const override;
  Sampling sampling() const override { return Sampling::with_replacement; }
};

/// f(U, V) = 0.5 * ||U V^T - A||_F^2 with x = [vec(U), vec(V)], both row-major.
class MatrixFactorization final : public Problem {
 public:
  MatrixFactorization(Matrix target, std::size_t rank);
  std::string name() const override { return "matrix_factorization"; }
  std::size_t dim() const override { return (target_.rows + target_.cols) * rank_; }
  double value(std::span<const double> x) const override;
  void gradient_into(std::span<const double> x, std::span<double> out) const override;
  std::optional<double> f_star() const override { return std::nullopt; }

  const Matrix& target() const { return target_; }
  std::size_t rank() const { return rank_; }

 private:
  /// R = U V^T - A
  void residual(std::span<const double> x, Matrix& r) const;

  Matrix target_;
  std::size_t rank_;
};

/// f(x) = 1/(2m) sum_i (y_i - (a_i^T x)^2)^2 with uniform minibatches drawn
/// without replacement.
class PhaseRetrieval final : public FiniteSumProblem {
 public:
  PhaseRetrieval(Matrix sensing, Vector measurements, Vector ground_truth = {});
  std::string name() const override { return "phase_retrieval"; }
  std::size_t dim() const override { return sensing_.cols; }
  double value(std::span<const double> x) const override;
  void gradient_into(std::span<const double> x, std::span<double> out) const override;
  std::optional<double> f_star() const override { return std::nullopt; }

  std::size_t atom_count() const override { return sensing_.rows; }
  void add_atom_gradient(std::size_t i, std::span<const double> x, double weight,
                         std::span<double> out) const override;
  Sampling sampling() const override { return Sampling::without_replacement; }

  const Matrix& sensing() const { return sensing_; }
  const Vector& measurements() const { return measurements_; }
  const Vector& ground_truth() const { return ground_truth_; }

 private:
  Matrix sensing_;
  Vector measurements_;
  Vector ground_truth_;
};

std::shared_ptr<SelfCalCosh> make_selfcal_cosh(std::size_t dim);
std::shared_ptr<NoiseExample> make_noise_example();
/// Throws std::invalid_argument unless 1 <= rank < min(rows, cols).
std::shared_ptr<MatrixFactorization> make_matrix_factorization(Matrix target, std::size_t rank);

/// Random instance: a_i, z ~ N(0, 0.5), n_i ~ N(0, noise_variance) element-wise,
/// y_i = (a_i^T z)^2 + n_i. All draws come from the data stream of `seed`.
std::shared_ptr<PhaseRetrieval> make_phase_retrieval(std::size_t n, std::size_t m,
                                                     std::uint64_t seed,
                                                     double noise_variance = 16.0);

/// Dense m x n matrix with i.i.d. N(0, 1) entries from the data stream of `seed`.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Reads MovieLens u.data (user, item, rating, timestamp per line) into a dense
/// user x item matrix; unobserved entries are 0.
Matrix load_movielens(const std::filesystem::path& path);

/// Central differences: (f(x + h e_i) - f(x - h e_i)) / (2h).
Vector finite_diff_grad(const Problem& problem, std::span<const double> x, double step);

}  // namespace nlpgm
