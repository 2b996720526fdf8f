#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "nlpgm/analysis.hpp"
#include "nlpgm/certify.hpp"
#include "nlpgm/problems.hpp"

using namespace nlpgm;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

double rel_error(const Vector& a, const Vector& b) {
  return norm(difference(a, b)) / std::max(1.0, norm(a));
}

}  // namespace

TEST(SelfCal, Examples) {
  const auto p = make_selfcal_cosh(3);
  const Vector zero(3, 0.0);
  EXPECT_EQ(p->value(zero), 0.0);
  EXPECT_EQ(p->gradient(zero), zero);
  const auto q = make_selfcal_cosh(1);
  EXPECT_NEAR(q->value(std::vector{1.0}), std::cosh(1.0) - 1, 1e-15);
  EXPECT_NEAR(q->gradient(std::vector{1.0})[0], std::sinh(1.0), 1e-15);
  EXPECT_NEAR(q->value(std::vector{1.0}), 0.54308, 1e-5);
  EXPECT_NEAR(q->gradient(std::vector{1.0})[0], 1.17520, 1e-5);
  EXPECT_THROW(make_selfcal_cosh(0), std::invalid_argument);
}

TEST(SelfCal, StationarityEqualsValue) {
  const auto p = make_selfcal_cosh(4);
  const ReferenceFunction ref(cosh_kernel(), Shape::isotropic);
  CounterRng rng(3, Stream::check);
  for (int i = 0; i < 200; ++i) {
    const Vector x = sample_vector(rng, 4, std::vector{0.1, 1.0, 3.0});
    const double f = p->value(x);
    EXPECT_NEAR(ref.stationarity(p->gradient(x)), f, 1e-12 * (1 + f));
  }
}

TEST(NoiseExampleProblem, Examples) {
  const auto p = make_noise_example();
  EXPECT_DOUBLE_EQ(p->value(std::vector{0.0}), 4.5);
  EXPECT_DOUBLE_EQ(p->gradient(std::vector{0.0})[0], 3.0);
  EXPECT_EQ(p->f_star(), 3.0);
  EXPECT_DOUBLE_EQ(p->value(std::vector{-1.0}), 3.0);
  const Vector x{2.0};
  EXPECT_DOUBLE_EQ(p->atom_gradient(0, x)[0], 2.0);
  EXPECT_DOUBLE_EQ(p->atom_gradient(1, x)[0], 16.0);
  EXPECT_DOUBLE_EQ(0.5 * (p->atom_gradient(0, x)[0] + p->atom_gradient(1, x)[0]), 9.0);
  EXPECT_DOUBLE_EQ(p->gradient(x)[0], 9.0);
}

TEST(NoiseExampleProblem, PreconditionedNoiseBoundedRawNoiseNot) {
  const auto p = make_noise_example();
  const ReferenceFunction ref(cosh_kernel(), Shape::isotropic);
  double prev_raw = 0.0;
  double worst = 0.0, far = 0.0;
  for (double mag : {10.0, 1e3, 1e6}) {
    double raw = 0.0;
    for (double x : {mag, -mag}) {
      const Vector xv{x};
      const Vector g = p->gradient(xv);
      const Vector u = ref.precond(g);
      double pre = 0.0, var = 0.0;
      for (std::size_t i = 0; i < 2; ++i) {
        const Vector gi = p->atom_gradient(i, xv);
        pre += 0.5 * ref.value(difference(u, ref.precond(gi)));
        var += 0.5 * squared_norm(difference(gi, g));
      }
      worst = std::max(worst, pre);
      if (mag == 1e6) far = std::max(far, pre);
      raw = std::max(raw, var);
    }
    EXPECT_GT(raw, 100 * prev_raw);
    prev_raw = raw;
  }
  // large |x|: arsinh gaps tend to ln(3/2) and ln(4/3), so the mean tends to 1/16;
  // the largest value is at x = 10, where the gaps are arsinh(33/18) and arsinh(48/33)
  const double at10 = 0.5 * (std::cosh(std::asinh(33.0) - std::asinh(18.0)) - 1) +
                      0.5 * (std::cosh(std::asinh(48.0) - std::asinh(33.0)) - 1);
  EXPECT_NEAR(worst, at10, 1e-12);
  EXPECT_NEAR(far, 1.0 / 16.0, 1e-6);
}

TEST(MatrixFactorizationProblem, ScalarExampleEmbedded) {
  EXPECT_THROW(make_matrix_factorization(Matrix(1, 1, 2.0), 1), std::invalid_argument);
  EXPECT_THROW(make_matrix_factorization(Matrix(3, 4), 0), std::invalid_argument);
  EXPECT_THROW(make_matrix_factorization(Matrix(3, 4), 3), std::invalid_argument);

  // 1x1 instance A = 2, U = V = 1 padded with a zero row and column
  Matrix a(2, 2);
  a(0, 0) = 2.0;
  const auto p = make_matrix_factorization(a, 1);
  const Vector x{1.0, 0.0, 1.0, 0.0};  // U = (1, 0)^T, V = (1, 0)^T
  EXPECT_DOUBLE_EQ(p->value(x), 0.5);
  EXPECT_EQ(p->gradient(x), (Vector{-1.0, 0.0, -1.0, 0.0}));
}

TEST(MatrixFactorizationProblem, ExactFactorizationIsStationary) {
  // A = U V^T with U = [1 2; 0 1; 3 -1], V = [2 0; 1 1]
  const Vector u{1, 2, 0, 1, 3, -1};
  const Vector v{2, 0, 1, 1};
  Matrix a(3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) a(i, j) = u[2 * i] * v[2 * j] + u[2 * i + 1] * v[2 * j + 1];
  // rank 2 is not < min(3, 2); use a 3x3 target with a zero column
  Matrix a3(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) a3(i, j) = a(i, j);
  const auto p = make_matrix_factorization(a3, 2);
  Vector x = u;
  x.insert(x.end(), v.begin(), v.end());
  x.insert(x.end(), {0.0, 0.0});
  EXPECT_EQ(p->value(x), 0.0);
  EXPECT_EQ(p->gradient(x), Vector(x.size(), 0.0));
  EXPECT_EQ(p->dim(), 12u);
}

TEST(MatrixFactorizationProblem, GradientMatchesFiniteDifferences) {
  const auto p = make_matrix_factorization(gaussian_matrix(6, 5, 4), 2);
  CounterRng rng(8, Stream::check);
  for (int i = 0; i < 20; ++i) {
    const Vector x = sample_vector(rng, p->dim(), std::vector{0.5, 1.0});
    const Vector fd = finite_diff_grad(*p, x, 1e-6 * (1 + norm(x)));
    EXPECT_LE(rel_error(p->gradient(x), fd), 1e-5);
  }
}

TEST(PhaseRetrievalProblem, ScalarExample) {
  Matrix a(1, 1, 1.0);
  const PhaseRetrieval p(a, Vector{0.0});
  EXPECT_DOUBLE_EQ(p.value(std::vector{1.0}), 0.5);
  EXPECT_DOUBLE_EQ(p.gradient(std::vector{1.0})[0], 2.0);
  EXPECT_NEAR(finite_diff_grad(p, std::vector{1.0}, 1e-5)[0], 2.0, 1e-8);
}

TEST(PhaseRetrievalProblem, ZeroNoiseInterpolates) {
  const auto p = make_phase_retrieval(10, 30, 5, 0.0);
  EXPECT_EQ(p->ground_truth().size(), 10u);
  EXPECT_EQ(p->value(p->ground_truth()), 0.0);
  const auto noisy = make_phase_retrieval(10, 30, 5);
  EXPECT_GT(noisy->value(noisy->ground_truth()), 0.0);
  EXPECT_THROW(make_phase_retrieval(0, 3, 1), std::invalid_argument);
}

TEST(PhaseRetrievalProblem, MomentsOfGeneratedData) {
  // entries N(0, 0.5): sample variance near 0.5, not 0.25
  const auto p = make_phase_retrieval(200, 500, 1, 16.0);
  double s = 0.0, s2 = 0.0;
  for (double v : p->sensing().data) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(p->sensing().data.size());
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 0.5, 0.01);
  // noise variance 16
  double ns2 = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    const double q = dot(p->sensing().row(i), p->ground_truth());
    ns2 += std::pow(p->measurements()[i] - q * q, 2);
  }
  EXPECT_NEAR(ns2 / 500, 16.0, 3.0);
}

TEST(PhaseRetrievalProblem, FullBatchSampleIsExactGradient) {
  const auto p = make_phase_retrieval(8, 20, 2);
  const Vector x(8, 0.7);
  CounterRng rng(0, Stream::sampling);
  EXPECT_EQ(p->sample(x, rng, 20), p->gradient(x));
  EXPECT_EQ(p->sample(x, rng, 50), p->gradient(x));
  EXPECT_THROW(p->sample(x, rng, 0), std::invalid_argument);
}

TEST(PhaseRetrievalProblem, MinibatchIsWithoutReplacement) {
  // with one-hot sensing rows each atom gradient touches one coordinate, so a
  // batch without replacement has exactly `batch` non-zero coordinates
  const std::size_t m = 12;
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i) a(i, i) = 1.0;
  const PhaseRetrieval p(a, Vector(m, 4.0));
  const Vector x(m, 1.0);
  CounterRng rng(9, Stream::sampling);
  for (int t = 0; t < 200; ++t) {
    const Vector g = p.sample(x, rng, 5);
    std::size_t nz = 0;
    for (double v : g) nz += v != 0.0;
    EXPECT_EQ(nz, 5u);
  }
}

TEST(Unbiasedness, AtomAverageReproducesGradient) {
  const auto noise = make_noise_example();
  EXPECT_TRUE(certify_unbiasedness(*noise, std::vector{0.0}, 10.0, 100, 0).passed());
  const auto pr = make_phase_retrieval(10, 8, 1);
  EXPECT_TRUE(certify_unbiasedness(*pr, Vector(10, 1.0), 1.0, 100, 0).passed());
}

TEST(Unbiasedness, WithReplacementMeanConverges) {
  const auto p = make_noise_example();
  CounterRng rng(4, Stream::sampling);
  const Vector x{2.0};
  double s = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) s += p->sample(x, rng, 1)[0];
  // atoms 2 and 16: std 7, standard error 7 / sqrt(draws)
  EXPECT_NEAR(s / draws, 9.0, 5 * 7.0 / std::sqrt(draws));
}

TEST(Variance, ScalesInverselyWithBatch) {
  const auto p = make_noise_example();
  const Vector x{3.0};
  const double v1 = gradient_variance_estimate(*p, x, 1, 20000, 1);
  // atoms 4 and 20 around mean 12: variance exactly 64
  EXPECT_NEAR(v1, 64.0, 64.0 * 5 * std::sqrt(2.0 / 20000));
  for (std::size_t b : {4u, 16u, 64u}) {
    const double vb = gradient_variance_estimate(*p, x, b, 20000, 2);
    EXPECT_NEAR(vb * static_cast<double>(b), 64.0, 64.0 * 5 * std::sqrt(2.0 / 20000)) << b;
  }
}

TEST(FiniteDiff, Examples) {
  const Quadratic q(3);
  const Vector x{0.5, -2.0, 7.0};
  const Vector g = finite_diff_grad(q, x, 1e-3);
  // exact for quadratics up to rounding of order eps * f / h
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g[i], x[i], 1e-10);
  const auto s = make_selfcal_cosh(1);
  EXPECT_NEAR(finite_diff_grad(*s, std::vector{1.0}, 1e-5)[0], std::sinh(1.0), 1e-6);
  EXPECT_THROW(finite_diff_grad(q, x, 0.0), std::invalid_argument);
}

TEST(FiniteDiff, CertifierCoversEveryProblem) {
  EXPECT_TRUE(certify_gradient(*make_selfcal_cosh(3), Vector(3, 0.0), 2.0, 100, 0).passed());
  EXPECT_TRUE(certify_gradient(*make_noise_example(), Vector{0.0}, 10.0, 100, 0).passed());
  const auto pr = make_phase_retrieval(10, 8, 0);
  EXPECT_TRUE(certify_gradient(*pr, Vector(10, 0.0), 1.0, 100, 0).passed());
}

TEST(MovieLens, Examples) {
  Matrix one = load_movielens(write_temp("nlpgm_ml1.data", "1\t1\t5\t0\n"));
  EXPECT_EQ(one.rows, 1u);
  EXPECT_EQ(one.cols, 1u);
  EXPECT_EQ(one(0, 0), 5.0);

  Matrix two = load_movielens(write_temp("nlpgm_ml2.data", "1\t2\t3\t0\n2\t1\t4\t0\n"));
  Matrix expect(2, 2);
  expect(0, 1) = 3.0;
  expect(1, 0) = 4.0;
  EXPECT_EQ(two, expect);
  EXPECT_EQ(two.nonzeros(), 2u);
}

TEST(MovieLens, Errors) {
  EXPECT_THROW(load_movielens("/nonexistent/u.data"), std::runtime_error);
  EXPECT_THROW(load_movielens(write_temp("nlpgm_ml3.data", "1\t2\tx\t0\n")), std::runtime_error);
  EXPECT_THROW(load_movielens(write_temp("nlpgm_ml4.data", "0\t2\t3\t0\n")), std::runtime_error);
  EXPECT_THROW(load_movielens(write_temp("nlpgm_ml5.data", "1\t2\t3\n")), std::runtime_error);
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
  CounterRng a(7, Stream::data), b(7, Stream::data), c(7, Stream::init), d(8, Stream::data);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    EXPECT_NE(va, d.next_u64());
  }
}

TEST(Rng, NormalMomentsAndUniformRange) {
  CounterRng rng(1, Stream::check);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(2.0, 4.0);
    s += z;
    s2 += (z - 2.0) * (z - 2.0);
  }
  EXPECT_NEAR(s / n, 2.0, 5 * 2.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 4.0, 0.1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(3), 3u);
  }
}
