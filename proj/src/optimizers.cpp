#include "nlpgm/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nlpgm {

namespace {

void require_finite(std::span<const double> g, const char* what) {
  if (!all_finite(g)) throw NonFiniteError(std::string("non-finite ") + what);
}

}  // namespace

OptimizerState npgm_step(OptimizerState s, const Problem& problem, const ReferenceFunction& ref) {
  const Vector g = problem.gradient(s.x);
  require_finite(g, "gradient");
  axpy(-s.gamma, ref.precond(g), s.x);
  ++s.k;
  return s;
}

OptimizerState mnpgm_step(OptimizerState s, const Problem& problem, const ReferenceFunction& ref) {
  if (!(s.beta >= 0.0 && s.beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
  const Vector g = problem.gradient(s.x);
  require_finite(g, "gradient");
  const Vector u = ref.precond(g);
  for (std::size_t i = 0; i < u.size(); ++i) s.m[i] = s.beta * s.m[i] + (1.0 - s.beta) * u[i];
  axpy(-s.gamma, s.m, s.x);
  ++s.k;
  return s;
}

OptimizerState snpgm_step(OptimizerState s, const StochasticOracle& oracle,
                          const ReferenceFunction& ref, CounterRng& rng, std::size_t batch) {
  const Vector g = oracle.sample(s.x, rng, batch);
  require_finite(g, "stochastic gradient");
  axpy(-s.gamma, ref.precond(g), s.x);
  ++s.k;
  return s;
}

OptimizerState gd_step(OptimizerState s, const Problem& problem) {
  const Vector g = problem.gradient(s.x);
  require_finite(g, "gradient");
  axpy(-s.gamma, g, s.x);
  ++s.k;
  return s;
}

OptimizerState gdm_step(OptimizerState s, const Problem& problem) {
  if (!(s.beta >= 0.0 && s.beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
  const Vector g = problem.gradient(s.x);
  require_finite(g, "gradient");
  for (std::size_t i = 0; i < g.size(); ++i) s.m[i] = s.beta * s.m[i] + (1.0 - s.beta) * g[i];
  axpy(-s.gamma, s.m, s.x);
  ++s.k;
  return s;
}

OptimizerState clipped_step(OptimizerState s, const StochasticOracle& oracle, double eta,
                            double gamma_clip, CounterRng& rng, std::size_t batch) {
  if (!(eta > 0.0) || !(gamma_clip > 0.0))
    throw std::invalid_argument("clipping parameters must be positive");
  const Vector g = oracle.sample(s.x, rng, batch);
  require_finite(g, "stochastic gradient");
  const double gn = norm(g);
  if (gn > 0.0) axpy(-std::min(gamma_clip, eta / gn), g, s.x);
  ++s.k;
  return s;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::npgm: return "npgm";
    case Method::mnpgm: return "mnpgm";
    case Method::snpgm: return "snpgm";
    case Method::gd: return "gd";
    case Method::gdm: return "gdm";
    case Method::clipped: return "clipped";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::npgm, Method::mnpgm, Method::snpgm, Method::gd, Method::gdm,
                   Method::clipped})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

bool is_stochastic(Method method) {
  return method == Method::snpgm || method == Method::clipped;
}

RunTrace run(const Problem& problem, const StochasticOracle* oracle, const ReferenceFunction& ref,
             const RunSettings& settings, Vector x0, std::uint64_t seed) {
  if (settings.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (settings.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (x0.size() != problem.dim()) throw std::invalid_argument("x0 has the wrong dimension");
  if (is_stochastic(settings.method) && oracle == nullptr)
    throw std::invalid_argument("stochastic method requires a stochastic oracle");

  const bool raw_momentum = settings.method == Method::gd || settings.method == Method::gdm;
  const ReferenceFunction quadratic(quadratic_kernel(), Shape::isotropic);
  const ReferenceFunction& momentum_ref = raw_momentum ? quadratic : ref;
  const auto f_star = problem.f_star();

  RunTrace trace;
  trace.seed = seed;
  CounterRng rng(seed, Stream::sampling);
  OptimizerState state = OptimizerState::start(std::move(x0), settings.gamma, settings.beta);

  const auto t0 = std::chrono::steady_clock::now();
  const double f0 = problem.value(state.x);
  const double blowup = 1e12 * (1.0 + std::abs(f0));
  Vector grad(problem.dim());

  auto record = [&](std::uint64_t k) -> bool {
    TraceRecord r;
    r.k = k;
    r.f = problem.value(state.x);
    problem.gradient_into(state.x, grad);
    r.grad_norm = norm(grad);
    if (std::isfinite(r.f) && all_finite(grad)) {
      try {
        r.stationarity = ref.stationarity(grad);
      } catch (const DomainError&) {
        // dual map rounded onto the boundary of a bounded-domain kernel
        r.stationarity = std::numeric_limits<double>::infinity();
      }
      if (f_star) {
        try {
          r.lyapunov = state.gamma * momentum_ref.value(state.m) + r.f - *f_star;
        } catch (const DomainError&) {
          r.lyapunov = std::numeric_limits<double>::infinity();
        }
      }
    } else {
      r.stationarity = std::numeric_limits<double>::quiet_NaN();
    }
    if (settings.timing)
      r.elapsed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    trace.records.push_back(r);
    if (!std::isfinite(r.f)) {
      trace.aborted = true;
      trace.abort_reason = "non-finite objective at k=" + std::to_string(k);
      return false;
    }
    if (r.f > blowup) {
      trace.aborted = true;
      trace.abort_reason = "objective exceeded divergence threshold at k=" + std::to_string(k);
      return false;
    }
    return true;
  };

  if (!record(0)) {
    trace.final_x = state.x;
    return trace;
  }

  for (std::size_t k = 1; k <= settings.iterations; ++k) {
    try {
      switch (settings.method) {
        case Method::npgm: state = npgm_step(std::move(state), problem, ref); break;
        case Method::mnpgm: state = mnpgm_step(std::move(state), problem, ref); break;
        case Method::snpgm:
          state = snpgm_step(std::move(state), *oracle, ref, rng, settings.batch);
          break;
        case Method::gd: state = gd_step(std::move(state), problem); break;
        case Method::gdm: state = gdm_step(std::move(state), problem); break;
        case Method::clipped:
          state = clipped_step(std::move(state), *oracle, settings.eta, settings.gamma_clip, rng,
                               settings.batch);
          break;
      }
    } catch (const NonFiniteError& e) {
      trace.aborted = true;
      trace.abort_reason = std::string(e.what()) + " at k=" + std::to_string(k - 1);
      break;
    }
    const bool logged = k % settings.eval_every == 0 || k == settings.iterations;
    if (logged && !record(k)) break;
    if (!logged) {
      // cheap divergence guard between logged iterations
      if (!all_finite(state.x)) {
        record(k);
        break;
      }
    }
  }
  trace.final_x = state.x;
  return trace;
}

}  // namespace nlpgm
