#include "nlpgm/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nlpgm {

Vector FiniteSumProblem::sample(std::span<const double> x, CounterRng& rng,
                                std::size_t batch) const {
  if (batch == 0) throw std::invalid_argument("batch size must be at least 1");
  const std::size_t n = atom_count();
  Vector g(dim(), 0.0);
  if (sampling() == Sampling::without_replacement) {
    if (batch >= n) {
      gradient_into(x, g);
      return g;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const double w = 1.0 / static_cast<double>(batch);
    for (std::size_t j = 0; j < batch; ++j) {
      std::swap(idx[j], idx[j + rng.below(n - j)]);
      add_atom_gradient(idx[j], x, w, g);
    }
    return g;
  }
  const double w = 1.0 / static_cast<double>(batch);
  for (std::size_t j = 0; j < batch; ++j) add_atom_gradient(rng.below(n), x, w, g);
  return g;
}

Vector FiniteSumProblem::atom_gradient(std::size_t i, std::span<const double> x) const {
  Vector g(dim(), 0.0);
  add_atom_gradient(i, x, 1.0, g);
  return g;
}

// ---------------------------------------------------------------------------

SelfCalCosh::SelfCalCosh(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("selfcal_cosh: dim must be >= 1");
}

double SelfCalCosh::value(std::span<const double> x) const {
  const double s = std::sinh(0.5 * norm(x));
  return 2.0 * s * s;
}

void SelfCalCosh::gradient_into(std::span<const double> x, std::span<double> out) const {
  const double r = norm(x);
  if (r == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double c = std::sinh(r) / r;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
}

// ---------------------------------------------------------------------------

double NoiseExample::value(std::span<const double> x) const {
  const double a = x[0] - 1.0;
  const double b = x[0] + 2.0;
  return 0.5 * (a * a + 2.0 * b * b);
}

void NoiseExample::gradient_into(std::span<const double> x, std::span<double> out) const {
  out[0] = (x[0] - 1.0) + 2.0 * (x[0] + 2.0);
}

void NoiseExample::add_atom_gradient(std::size_t i, std::span<const double> x, double weight,
                                     std::span<double> out) const {
  const double g = i == 0 ? 2.0 * (x[0] - 1.0) : 4.0 * (x[0] + 2.0);
  out[0] += weight * g;
}

// ---------------------------------------------------------------------------

MatrixFactorization::MatrixFactorization(Matrix target, std::size_t rank)
    : target_(std::move(target)), rank_(rank) {
  if (rank == 0 || rank >= std::min(target_.rows, target_.cols))
    throw std::invalid_argument("matrix_factorization: rank must satisfy 1 <= r < min(m, n)");
}

void MatrixFactorization::residual(std::span<const double> x, Matrix& r) const {
  const std::size_t m = target_.rows, n = target_.cols, k = rank_;
  const double* u = x.data();
  const double* v = x.data() + m * k;
  r = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += u[i * k + l] * v[j * k + l];
      r(i, j) = s - target_(i, j);
    }
  }
}

double MatrixFactorization::value(std::span<const double> x) const {
  Matrix r;
  residual(x, r);
  return 0.5 * squared_norm(r.data);
}

void MatrixFactorization::gradient_into(std::span<const double> x, std::span<double> out) const {
  const std::size_t m = target_.rows, n = target_.cols, k = rank_;
  Matrix r;
  residual(x, r);
  const double* u = x.data();
  const double* v = x.data() + m * k;
  double* gu = out.data();
  double* gv = out.data() + m * k;
  std::fill(out.begin(), out.end(), 0.0);
  // grad_U = R V,  grad_V = R^T U
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double rij = r(i, j);
      for (std::size_t l = 0; l < k; ++l) {
        gu[i * k + l] += rij * v[j * k + l];
        gv[j * k + l] += rij * u[i * k + l];
      }
    }
  }
}

// ---------------------------------------------------------------------------

PhaseRetrieval::PhaseRetrieval(Matrix sensing, Vector measurements, Vector ground_truth)
    : sensing_(std::move(sensing)),
      measurements_(std::move(measurements)),
      ground_truth_(std::move(ground_truth)) {
  if (sensing_.rows == 0 || sensing_.cols == 0)
    throw std::invalid_argument("phase_retrieval: n and m must be >= 1");
  if (measurements_.size() != sensing_.rows)
    throw std::invalid_argument("phase_retrieval: one measurement per sensing vector required");
}

double PhaseRetrieval::value(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < sensing_.rows; ++i) {
    const double p = dot(sensing_.row(i), x);
    const double r = measurements_[i] - p * p;
    s += r * r;
  }
  return s / (2.0 * static_cast<double>(sensing_.rows));
}

void PhaseRetrieval::add_atom_gradient(std::size_t i, std::span<const double> x, double weight,
                                       std::span<double> out) const {
  const auto a = sensing_.row(i);
  const double p = dot(a, x);
  const double r = measurements_[i] - p * p;
  axpy(-2.0 * weight * r * p, a, out);
}

void PhaseRetrieval::gradient_into(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const double w = 1.0 / static_cast<double>(sensing_.rows);
  for (std::size_t i = 0; i < sensing_.rows; ++i) add_atom_gradient(i, x, w, out);
}

// ---------------------------------------------------------------------------

std::shared_ptr<SelfCalCosh> make_selfcal_cosh(std::size_t dim) {
  return std::make_shared<SelfCalCosh>(dim);
}

std::shared_ptr<NoiseExample> make_noise_example() { return std::make_shared<NoiseExample>(); }

std::shared_ptr<MatrixFactorization> make_matrix_factorization(Matrix target, std::size_t rank) {
  return std::make_shared<MatrixFactorization>(std::move(target), rank);
}

std::shared_ptr<PhaseRetrieval> make_phase_retrieval(std::size_t n, std::size_t m,
                                                     std::uint64_t seed, double noise_variance) {
  if (n == 0 || m == 0) throw std::invalid_argument("phase_retrieval: n and m must be >= 1");
  CounterRng rng(seed, Stream::data);
  Matrix a(m, n);
  for (double& v : a.data) v = rng.normal(0.0, 0.5);
  Vector z(n);
  for (double& v : z) v = rng.normal(0.0, 0.5);
  Vector y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double p = dot(a.row(i), z);
    y[i] = p * p + rng.normal(0.0, noise_variance);
  }
  return std::make_shared<PhaseRetrieval>(std::move(a), std::move(y), std::move(z));
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(seed, Stream::data);
  Matrix a(rows, cols);
  for (double& v : a.data) v = rng.normal();
  return a;
}

Matrix load_movielens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read MovieLens file '" + path.string() + "'");
  struct Entry {
    long user, item;
    double rating;
  };
  std::vector<Entry> entries;
  long max_user = 0, max_item = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long user = 0, item = 0, rating = 0, timestamp = 0;
    std::string extra;
    if (!(fields >> user >> item >> rating >> timestamp) || (fields >> extra)) {
      throw std::runtime_error("malformed MovieLens row at line " + std::to_string(line_no) +
                               ": '" + line + "'");
    }
    if (user < 1 || item < 1) {
      throw std::runtime_error("MovieLens ids must be >= 1 (line " + std::to_string(line_no) +
                               ")");
    }
    entries.push_back({user, item, static_cast<double>(rating)});
    max_user = std::max(max_user, user);
    max_item = std::max(max_item, item);
  }
  Matrix a(static_cast<std::size_t>(max_user), static_cast<std::size_t>(max_item));
  for (const auto& e : entries)
    a(static_cast<std::size_t>(e.user - 1), static_cast<std::size_t>(e.item - 1)) = e.rating;
  return a;
}

Vector finite_diff_grad(const Problem& problem, std::span<const double> x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  Vector probe(x.begin(), x.end());
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + step;
    const double fp = problem.value(probe);
    probe[i] = xi - step;
    const double fm = problem.value(probe);
    probe[i] = xi;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace nlpgm
