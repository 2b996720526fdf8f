#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "nlpgm/certify.hpp"
#include "nlpgm/experiment.hpp"
#include "nlpgm/optimizers.hpp"

using namespace nlpgm;

namespace {

const ReferenceFunction kCosh(cosh_kernel(), Shape::isotropic);
const ReferenceFunction kQuad(quadratic_kernel(), Shape::isotropic);

std::string csv(const RunTrace& t) {
  std::ostringstream out;
  write_trace_csv(t, out);
  return out.str();
}

RunSettings settings(Method m, double gamma, std::size_t iterations, double beta = 0.0) {
  RunSettings s;
  s.method = m;
  s.gamma = gamma;
  s.beta = beta;
  s.iterations = iterations;
  return s;
}

}  // namespace

TEST(Npgm, QuadraticKernelIsGradientDescent) {
  const auto p = make_phase_retrieval(6, 10, 1);
  OptimizerState a = OptimizerState::start(Vector(6, 0.4), 0.01);
  OptimizerState b = a;
  for (int i = 0; i < 20; ++i) {
    a = npgm_step(std::move(a), *p, kQuad);
    b = gd_step(std::move(b), *p);
    ASSERT_EQ(a.x, b.x);
  }
  EXPECT_EQ(a.k, 20u);
}

TEST(Npgm, FixedPointAtStationarity) {
  const Quadratic q(2);
  const OptimizerState s = npgm_step(OptimizerState::start({0.0, 0.0}, 3.0), q, kCosh);
  EXPECT_EQ(s.x, (Vector{0.0, 0.0}));
  EXPECT_EQ(s.k, 1u);
}

TEST(Npgm, CoshStepOnQuadratic) {
  const Quadratic q(1);
  const OptimizerState s = npgm_step(OptimizerState::start({1.0}, 1.0), q, kCosh);
  EXPECT_NEAR(s.x[0], 1.0 - std::log(1.0 + std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(s.x[0], 0.11863, 1e-5);
}

TEST(Npgm, NonFiniteGradientThrows) {
  const Quadratic q(1);
  EXPECT_THROW(npgm_step(OptimizerState::start({NAN}, 1.0), q, kCosh), NonFiniteError);
  EXPECT_THROW(gd_step(OptimizerState::start({INFINITY}, 1.0), q), NonFiniteError);
}

TEST(Mnpgm, BetaZeroMatchesNpgm) {
  const auto p = make_selfcal_cosh(3);
  OptimizerState a = OptimizerState::start({0.5, -1.0, 2.0}, 0.7, 0.0);
  OptimizerState b = a;
  for (int i = 0; i < 30; ++i) {
    a = mnpgm_step(std::move(a), *p, kCosh);
    b = npgm_step(std::move(b), *p, kCosh);
    ASSERT_EQ(a.x, b.x);
  }
}

TEST(Mnpgm, FirstStep) {
  const auto p = make_selfcal_cosh(2);
  const Vector x0{1.8, 2.4};
  const double gamma = 0.5, beta = 0.3;
  const OptimizerState s = mnpgm_step(OptimizerState::start(x0, gamma, beta), *p, kCosh);
  const Vector u0 = kCosh.precond(p->gradient(x0));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s.x[i], x0[i] - gamma * (1 - beta) * u0[i], 1e-15);
  EXPECT_THROW(mnpgm_step(OptimizerState::start(x0, gamma, 1.0), *p, kCosh), std::invalid_argument);
  EXPECT_THROW(gdm_step(OptimizerState::start(x0, gamma, -0.1), *p), std::invalid_argument);
}

TEST(Mnpgm, UnrolledMomentumAndEquivalentForm) {
  const auto p = make_matrix_factorization(gaussian_matrix(5, 4, 3), 2);
  const ReferenceFunction ref(cosh_kernel(), Shape::isotropic, 10.0);
  const double gamma = 0.3, beta = 0.8;
  CounterRng rng(2, Stream::init);
  OptimizerState s = OptimizerState::start(sample_vector(rng, p->dim(), std::vector{1.0}), gamma,
                                           beta);
  std::vector<Vector> us, xs{s.x};
  for (int k = 0; k < 25; ++k) {
    us.push_back(ref.precond(p->gradient(s.x)));
    s = mnpgm_step(std::move(s), *p, ref);
    xs.push_back(s.x);

    // m^k = (1 - beta) sum_j beta^j u^{k-j}
    Vector m(p->dim(), 0.0);
    for (int j = 0; j <= k; ++j) axpy((1 - beta) * std::pow(beta, j), us[k - j], m);
    for (std::size_t i = 0; i < m.size(); ++i)
      ASSERT_NEAR(s.m[i], m[i], 1e-12 * (1 + std::abs(m[i])));

    // x^{k+1} = x^k - (1 - beta) gamma u^k + beta (x^k - x^{k-1})
    const Vector& prev = k == 0 ? xs[0] : xs[k - 1];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double replay = xs[k][i] - (1 - beta) * gamma * us[k][i] + beta * (xs[k][i] - prev[i]);
      ASSERT_NEAR(xs[k + 1][i], replay, 1e-12 * (1 + std::abs(replay)));
    }
  }
}

TEST(Snpgm, FullBatchMatchesNpgm) {
  const auto p = make_phase_retrieval(6, 10, 4);
  const ReferenceFunction ref(cosh_kernel(), Shape::separable, 50.0);
  CounterRng rng(0, Stream::sampling);
  OptimizerState a = OptimizerState::start(Vector(6, 1.0), 0.05);
  OptimizerState b = a;
  for (int i = 0; i < 20; ++i) {
    a = snpgm_step(std::move(a), *p, ref, rng, 10);
    b = npgm_step(std::move(b), *p, ref);
    ASSERT_EQ(a.x, b.x);
  }
}

TEST(Snpgm, NoiseExampleAtomOneAtItsMinimizer) {
  // f_1'(1) = 0, so drawing atom 1 leaves x = 1; drawing atom 2 moves by arsinh(12)
  const auto p = make_noise_example();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed, Stream::sampling);
    const OptimizerState s = snpgm_step(OptimizerState::start({1.0}, 1.0), *p, kCosh, rng, 1);
    EXPECT_TRUE(s.x[0] == 1.0 || std::abs(s.x[0] - (1.0 - std::asinh(12.0))) < 1e-15) << s.x[0];
  }
}

TEST(Snpgm, ExactOracleIgnoresSeed) {
  auto q = std::make_shared<Quadratic>(2);
  const ExactOracle oracle(q);
  RunSettings st = settings(Method::snpgm, 0.5, 10);
  const RunTrace a = run(*q, &oracle, kCosh, st, {1.0, 2.0}, 1);
  const RunTrace b = run(*q, &oracle, kCosh, st, {1.0, 2.0}, 99);
  EXPECT_EQ(a.final_x, b.final_x);
}

TEST(Gd, Examples) {
  const Quadratic q(3);
  const OptimizerState s = gd_step(OptimizerState::start({4.0, -2.0, 9.0}, 1.0), q);
  EXPECT_EQ(s.x, Vector(3, 0.0));
  const auto p = make_selfcal_cosh(2);
  OptimizerState a = OptimizerState::start({0.3, 0.2}, 0.4, 0.0), b = a;
  for (int i = 0; i < 10; ++i) {
    a = gdm_step(std::move(a), *p);
    b = gd_step(std::move(b), *p);
    ASSERT_EQ(a.x, b.x);
  }
}

TEST(Gd, TraceMatchesQuadraticKernelNpgm) {
  const auto p = make_selfcal_cosh(2);
  const RunTrace a = run(*p, nullptr, kQuad, settings(Method::gd, 0.2, 50), {1.0, 0.5}, 0);
  const RunTrace b = run(*p, nullptr, kQuad, settings(Method::npgm, 0.2, 50), {1.0, 0.5}, 0);
  EXPECT_EQ(csv(a), csv(b));
}

TEST(Clipped, InactiveAndActiveClip) {
  const auto p = make_noise_example();
  CounterRng rng(0, Stream::sampling);
  // |g| <= eta / gamma_clip: plain step of length gamma_clip |g|
  const double x0 = -0.9;
  OptimizerState s = clipped_step(OptimizerState::start({x0}, 1.0), *p, 10.0, 0.1, rng, 1);
  const double g = (x0 - s.x[0]) / 0.1;
  EXPECT_TRUE(std::abs(g - 2 * (x0 - 1)) < 1e-12 || std::abs(g - 4 * (x0 + 2)) < 1e-12) << g;
  // large |g|: step length exactly eta
  s = clipped_step(OptimizerState::start({1e6}, 1.0), *p, 0.25, 1.0, rng, 1);
  EXPECT_NEAR(1e6 - s.x[0], 0.25, 1e-9);
  // zero gradient: unchanged
  const auto pr = std::make_shared<PhaseRetrieval>(Matrix(1, 1, 1.0), Vector{0.0});
  s = clipped_step(OptimizerState::start({0.0}, 1.0), *pr, 1.0, 1.0, rng, 1);
  EXPECT_EQ(s.x[0], 0.0);
  EXPECT_EQ(s.k, 1u);
  EXPECT_THROW(clipped_step(OptimizerState::start({0.0}, 1.0), *pr, 0.0, 1.0, rng, 1),
               std::invalid_argument);
}

TEST(Clipped, PaperParametersRun) {
  const auto p = make_phase_retrieval(20, 10, 0);
  CounterRng init(0, Stream::init);
  Vector x0(20);
  for (double& v : x0) v = 5.0 + std::sqrt(0.5) * init.normal();
  RunSettings st = settings(Method::clipped, 1.0, 50);
  st.eta = 0.000023;
  st.gamma_clip = 1.0;
  st.batch = 5;
  const RunTrace t = run(*p, p.get(), kCosh, st, x0, 0);
  EXPECT_FALSE(t.aborted);
  // every step moves by exactly eta when the gradient is large
  EXPECT_NEAR(norm(difference(t.final_x, x0)), 0.0, 50 * 0.000023 + 1e-12);
}

TEST(Methods, Names) {
  for (Method m : {Method::npgm, Method::mnpgm, Method::snpgm, Method::gd, Method::gdm,
                   Method::clipped})
    EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("adam"), std::invalid_argument);
  EXPECT_TRUE(is_stochastic(Method::clipped));
  EXPECT_FALSE(is_stochastic(Method::mnpgm));
}

TEST(Run, SelfCalOneStepToMinimizer) {
  const auto p = make_selfcal_cosh(1);
  const RunTrace t = run(*p, nullptr, kCosh, settings(Method::npgm, 1.0, 1), {1.0}, 0);
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_EQ(t.final_x[0], 0.0);
  EXPECT_EQ(t.records[1].f, 0.0);
  EXPECT_NEAR(t.records[0].f, std::cosh(1.0) - 1, 1e-15);
}

TEST(Run, RecordLayout) {
  const auto p = make_selfcal_cosh(2);
  const RunTrace t = run(*p, nullptr, kCosh, settings(Method::mnpgm, 0.5, 10, 0.2), {1.0, 1.0}, 3);
  ASSERT_EQ(t.records.size(), 11u);
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    const TraceRecord& r = t.records[k];
    EXPECT_EQ(r.k, k);
    EXPECT_NEAR(r.stationarity, r.f, 1e-12);  // selfcal identity
    ASSERT_TRUE(r.lyapunov.has_value());
    EXPECT_FALSE(r.elapsed_ns.has_value());
  }
  EXPECT_EQ(*t.records[0].lyapunov, t.records[0].f);  // m^{-1} = 0
  EXPECT_EQ(t.seed, 3u);

  // lyapunov empty without f_star; eval_every thins the records
  const auto pr = make_phase_retrieval(5, 8, 0);
  RunSettings st = settings(Method::snpgm, 0.01, 25);
  st.eval_every = 10;
  st.batch = 3;
  const RunTrace u = run(*pr, pr.get(), kCosh, st, Vector(5, 1.0), 0);
  ASSERT_EQ(u.records.size(), 4u);
  EXPECT_EQ(u.records[3].k, 25u);
  EXPECT_FALSE(u.records[0].lyapunov.has_value());
  const std::string text = csv(u);
  EXPECT_EQ(text.substr(0, text.find('\n')), kTraceHeader);
  EXPECT_NE(text.find(",,\n"), std::string::npos);
}

TEST(Run, TimingColumn) {
  const auto p = make_selfcal_cosh(2);
  RunSettings st = settings(Method::npgm, 0.5, 5);
  st.timing = true;
  const RunTrace t = run(*p, nullptr, kCosh, st, {1.0, 1.0}, 0);
  for (const auto& r : t.records) ASSERT_TRUE(r.elapsed_ns.has_value());
}

TEST(Run, Preconditions) {
  const auto p = make_selfcal_cosh(2);
  EXPECT_THROW(run(*p, nullptr, kCosh, settings(Method::npgm, 1.0, 0), {1.0, 1.0}, 0),
               std::invalid_argument);
  EXPECT_THROW(run(*p, nullptr, kCosh, settings(Method::npgm, 1.0, 5), {1.0}, 0),
               std::invalid_argument);
  EXPECT_THROW(run(*p, nullptr, kCosh, settings(Method::snpgm, 1.0, 5), {1.0, 1.0}, 0),
               std::invalid_argument);
}

TEST(Run, DivergenceAborts) {
  // gd on a quartic with a large step blows up
  const auto pr = make_phase_retrieval(4, 6, 0);
  const RunTrace t = run(*pr, nullptr, kCosh, settings(Method::gd, 10.0, 100), Vector(4, 5.0), 0);
  EXPECT_TRUE(t.aborted);
  EXPECT_FALSE(t.abort_reason.empty());
  EXPECT_LT(t.records.size(), 101u);
}

TEST(Run, DeterministicAcrossRepeats) {
  const auto pr = make_phase_retrieval(10, 20, 1);
  RunSettings st = settings(Method::snpgm, 0.02, 200);
  st.batch = 5;
  const RunTrace a = run(*pr, pr.get(), kCosh, st, Vector(10, 2.0), 11);
  const RunTrace b = run(*pr, pr.get(), kCosh, st, Vector(10, 2.0), 11);
  const RunTrace c = run(*pr, pr.get(), kCosh, st, Vector(10, 2.0), 12);
  EXPECT_EQ(csv(a), csv(b));
  EXPECT_NE(csv(a), csv(c));
}

TEST(Descent, MonotoneOnSelfCal) {
  const auto p = make_selfcal_cosh(3);
  for (double gamma : {0.1, 0.5, 1.0}) {
    const RunTrace t = run(*p, nullptr, kCosh, settings(Method::npgm, gamma, 200), {2.0, -1.0, 0.5}, 0);
    for (std::size_t k = 1; k < t.records.size(); ++k)
      ASSERT_LE(t.records[k].f, t.records[k - 1].f) << gamma;
  }
}

TEST(Descent, SufficientDecreaseAggregate) {
  // f(x^{K+1}) <= f(x^0) - gamma (1 - 2 beta) sum_{k<=K} phi(u^k)
  const auto p = make_selfcal_cosh(2);
  for (double beta : {0.0, 0.2, 0.45}) {
    const double gamma = 1.0;
    const RunTrace t = run(*p, nullptr, kCosh, settings(Method::mnpgm, gamma, 300, beta),
                           rate_start_point(), 0);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
      acc += t.records[k].stationarity;
      ASSERT_LE(t.records[k + 1].f, t.records[0].f - gamma * (1 - 2 * beta) * acc + 1e-9)
          << "beta=" << beta << " k=" << k;
    }
  }
}

TEST(Descent, LyapunovContracts) {
  const auto p = make_selfcal_cosh(2);
  for (double beta : {0.1, 0.25, 0.4}) {
    for (double gamma : {0.5, 1.0}) {
      const RunTrace t = run(*p, nullptr, kCosh, settings(Method::mnpgm, gamma, 1000, beta),
                             rate_start_point(), 0);
      EXPECT_TRUE(certify_thm24_lyapunov(t, beta, gamma, 1.0).passed());
    }
  }
}
