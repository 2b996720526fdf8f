#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nlpgm/analysis.hpp"
#include "nlpgm/certify.hpp"
#include "nlpgm/config.hpp"
#include "nlpgm/experiment.hpp"
#include "nlpgm/kernels.hpp"
#include "nlpgm/optimizers.hpp"
#include "nlpgm/problems.hpp"

namespace py = pybind11;
using namespace nlpgm;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix a(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < a.rows; ++i) {
    if (rows[i].size() != a.cols) throw std::invalid_argument("ragged matrix");
    for (std::size_t j = 0; j < a.cols; ++j) a(i, j) = rows[i][j];
  }
  return a;
}

std::vector<std::vector<double>> from_matrix(const Matrix& a) {
  std::vector<std::vector<double>> rows(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) rows[i].assign(a.row(i).begin(), a.row(i).end());
  return rows;
}

}  // namespace

PYBIND11_MODULE(_nlpgm, m) {
  m.doc() = "Nonlinearly preconditioned gradient methods";
  m.attr("__version__") = "0.1.0";
  m.attr("TRACE_HEADER") = kTraceHeader;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  // kernels
  py::class_<Kernel>(m, "Kernel")
      .def_readonly("name", &Kernel::name)
      .def_readonly("domain_radius", &Kernel::domain_radius)
      .def_readonly("strong_convexity", &Kernel::strong_convexity)
      .def_readonly("two_subhomogeneous", &Kernel::two_subhomogeneous)
      .def("eval", [](const Kernel& k, double t) { return k.eval(t); })
      .def("grad", [](const Kernel& k, double t) { return k.grad(t); })
      .def("conj", [](const Kernel& k, double s) { return k.conj(s); })
      .def("conj_grad", [](const Kernel& k, double s) { return k.conj_grad(s); })
      .def("in_domain", &Kernel::in_domain)
      .def("__repr__", [](const Kernel& k) { return "<Kernel " + k.name + ">"; });

  m.def("make_kernel", [](const std::string& name, const std::vector<double>& params) {
    return make_kernel(name, params);
  }, py::arg("name"), py::arg("params") = std::vector<double>{});
  m.def("perturb_dual_map", &perturb_dual_map, py::arg("kernel"), py::arg("delta"));

  py::class_<ReferenceFunction>(m, "ReferenceFunction")
      .def(py::init([](const Kernel& k, const std::string& shape, double scale) {
             return ReferenceFunction(k, shape_from_string(shape), scale);
           }),
           py::arg("kernel"), py::arg("shape") = "isotropic", py::arg("scale") = 1.0)
      .def_property_readonly("kernel", &ReferenceFunction::kernel)
      .def_property_readonly("shape", [](const ReferenceFunction& r) {
        return std::string(to_string(r.shape()));
      })
      .def_property_readonly("scale", &ReferenceFunction::scale)
      .def_property_readonly("strong_convexity", &ReferenceFunction::strong_convexity)
      .def("in_domain", [](const ReferenceFunction& r, const Vector& x) { return r.in_domain(x); })
      .def("value", [](const ReferenceFunction& r, const Vector& x) { return r.value(x); })
      .def("gradient", [](const ReferenceFunction& r, const Vector& x) { return r.gradient(x); })
      .def("conj_value", [](const ReferenceFunction& r, const Vector& y) { return r.conj_value(y); })
      .def("precond", [](const ReferenceFunction& r, const Vector& y) { return r.precond(y); })
      .def("stationarity", [](const ReferenceFunction& r, const Vector& g) {
        return r.stationarity(g);
      })
      .def("episcale_value", [](const ReferenceFunction& r, double c, const Vector& x) {
        return r.episcale_value(c, x);
      });

  // problems
  py::class_<Problem, std::shared_ptr<Problem>>(m, "Problem")
      .def_property_readonly("name", &Problem::name)
      .def_property_readonly("dim", &Problem::dim)
      .def_property_readonly("f_star", &Problem::f_star)
      .def_property_readonly("aniso_constant", &Problem::aniso_constant)
      .def("value", [](const Problem& p, const Vector& x) { return p.value(x); })
      .def("gradient", [](const Problem& p, const Vector& x) { return p.gradient(x); });

  py::class_<StochasticOracle, std::shared_ptr<StochasticOracle>>(m, "StochasticOracle");

  py::class_<FiniteSumProblem, Problem, StochasticOracle, std::shared_ptr<FiniteSumProblem>>(
      m, "FiniteSumProblem")
      .def_property_readonly("atom_count", &FiniteSumProblem::atom_count)
      .def("atom_gradient", [](const FiniteSumProblem& p, std::size_t i, const Vector& x) {
        if (i >= p.atom_count()) throw py::index_error("atom index out of range");
        return p.atom_gradient(i, x);
      })
      .def("sample", [](const FiniteSumProblem& p, const Vector& x, std::uint64_t seed,
                        std::size_t batch) {
        CounterRng rng(seed, Stream::sampling);
        return p.sample(x, rng, batch);
      }, py::arg("x"), py::arg("seed"), py::arg("batch") = 1);

  py::class_<SelfCalCosh, Problem, std::shared_ptr<SelfCalCosh>>(m, "SelfCalCosh");
  py::class_<Quadratic, Problem, std::shared_ptr<Quadratic>>(m, "Quadratic");
  py::class_<NoiseExample, FiniteSumProblem, std::shared_ptr<NoiseExample>>(m, "NoiseExample");
  py::class_<MatrixFactorization, Problem, std::shared_ptr<MatrixFactorization>>(
      m, "MatrixFactorization")
      .def_property_readonly("rank", &MatrixFactorization::rank)
      .def_property_readonly("target", [](const MatrixFactorization& p) {
        return from_matrix(p.target());
      });
  py::class_<PhaseRetrieval, FiniteSumProblem, std::shared_ptr<PhaseRetrieval>>(m, "PhaseRetrieval")
      .def(py::init([](const std::vector<std::vector<double>>& a, const Vector& y) {
        return std::make_shared<PhaseRetrieval>(to_matrix(a), y);
      }))
      .def_property_readonly("ground_truth", &PhaseRetrieval::ground_truth)
      .def_property_readonly("measurements", &PhaseRetrieval::measurements);

  m.def("make_selfcal_cosh", &make_selfcal_cosh, py::arg("dim"));
  m.def("make_quadratic", [](std::size_t dim) { return std::make_shared<Quadratic>(dim); },
        py::arg("dim"));
  m.def("make_noise_example", &make_noise_example);
  m.def("make_matrix_factorization", [](const std::vector<std::vector<double>>& a, std::size_t r) {
    return make_matrix_factorization(to_matrix(a), r);
  }, py::arg("target"), py::arg("rank"));
  m.def("make_phase_retrieval", &make_phase_retrieval, py::arg("n"), py::arg("m"),
        py::arg("seed"), py::arg("noise_variance") = 16.0);
  m.def("gaussian_matrix", [](std::size_t rows, std::size_t cols, std::uint64_t seed) {
    return from_matrix(gaussian_matrix(rows, cols, seed));
  });
  m.def("load_movielens", [](const std::filesystem::path& path) {
    return from_matrix(load_movielens(path));
  });
  m.def("finite_diff_grad", [](const Problem& p, const Vector& x, double step) {
    return finite_diff_grad(p, x, step);
  }, py::arg("problem"), py::arg("x"), py::arg("step"));

  // optimizers
  py::class_<OptimizerState>(m, "OptimizerState")
      .def(py::init([](Vector x0, double gamma, double beta) {
             return OptimizerState::start(std::move(x0), gamma, beta);
           }),
           py::arg("x0"), py::arg("gamma"), py::arg("beta") = 0.0)
      .def_readwrite("x", &OptimizerState::x)
      .def_readwrite("m", &OptimizerState::m)
      .def_readwrite("k", &OptimizerState::k)
      .def_readwrite("gamma", &OptimizerState::gamma)
      .def_readwrite("beta", &OptimizerState::beta);

  m.def("npgm_step", &npgm_step);
  m.def("mnpgm_step", &mnpgm_step);
  m.def("gd_step", &gd_step);
  m.def("gdm_step", &gdm_step);
  m.def("snpgm_step", [](OptimizerState s, const FiniteSumProblem& oracle,
                         const ReferenceFunction& ref, std::uint64_t seed, std::size_t batch) {
    CounterRng rng(seed, Stream::sampling);
    return snpgm_step(std::move(s), oracle, ref, rng, batch);
  }, py::arg("state"), py::arg("oracle"), py::arg("ref"), py::arg("seed"), py::arg("batch") = 1);
  m.def("clipped_step", [](OptimizerState s, const FiniteSumProblem& oracle, double eta,
                           double gamma_clip, std::uint64_t seed, std::size_t batch) {
    CounterRng rng(seed, Stream::sampling);
    return clipped_step(std::move(s), oracle, eta, gamma_clip, rng, batch);
  }, py::arg("state"), py::arg("oracle"), py::arg("eta"), py::arg("gamma_clip"), py::arg("seed"),
     py::arg("batch") = 1);

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("k", &TraceRecord::k)
      .def_readonly("f", &TraceRecord::f)
      .def_readonly("grad_norm", &TraceRecord::grad_norm)
      .def_readonly("stationarity", &TraceRecord::stationarity)
      .def_readonly("lyapunov", &TraceRecord::lyapunov)
      .def_readonly("elapsed_ns", &TraceRecord::elapsed_ns);

  py::class_<RunTrace>(m, "RunTrace")
      .def_readonly("records", &RunTrace::records)
      .def_readonly("seed", &RunTrace::seed)
      .def_readonly("aborted", &RunTrace::aborted)
      .def_readonly("abort_reason", &RunTrace::abort_reason)
      .def_readonly("final_x", &RunTrace::final_x)
      .def("to_csv", [](const RunTrace& t) {
        std::ostringstream out;
        write_trace_csv(t, out);
        return out.str();
      });

  m.def("run", [](std::shared_ptr<Problem> problem, const ReferenceFunction& ref,
                  const std::string& method, Vector x0, double gamma, double beta,
                  std::size_t iterations, std::size_t batch, std::size_t eval_every, double eta,
                  double gamma_clip, std::uint64_t seed) {
    RunSettings s;
    s.method = method_from_string(method);
    s.gamma = gamma;
    s.beta = beta;
    s.iterations = iterations;
    s.batch = batch;
    s.eval_every = eval_every;
    s.eta = eta;
    s.gamma_clip = gamma_clip;
    const auto* oracle = dynamic_cast<const StochasticOracle*>(problem.get());
    if (is_stochastic(s.method) && oracle == nullptr)
      throw std::invalid_argument("method needs a finite-sum problem");
    return run(*problem, oracle, ref, s, std::move(x0), seed);
  }, py::arg("problem"), py::arg("ref"), py::arg("method"), py::arg("x0"), py::arg("gamma"),
     py::arg("beta") = 0.0, py::arg("iterations") = 100, py::arg("batch") = 1,
     py::arg("eval_every") = 1, py::arg("eta") = 1.0, py::arg("gamma_clip") = 1.0,
     py::arg("seed") = 0);

  // analysis
  py::class_<Witness>(m, "Witness")
      .def_readonly("point", &Witness::point)
      .def_readonly("residual", &Witness::residual);

  py::class_<CheckReport>(m, "CheckReport")
      .def_readonly("name", &CheckReport::name)
      .def_readonly("samples", &CheckReport::samples)
      .def_readonly("worst_residual", &CheckReport::worst_residual)
      .def_readonly("tolerance", &CheckReport::tolerance)
      .def_readonly("witnesses", &CheckReport::witnesses)
      .def_readonly("precondition_failed", &CheckReport::precondition_failed)
      .def_readonly("note", &CheckReport::note)
      .def_property_readonly("passed", &CheckReport::passed)
      .def("__repr__", &report_line);

  m.def("check_aniso_descent", [](const Problem& p, const ReferenceFunction& ref, double L,
                                  const Vector& x, const Vector& xbar) {
    return check_aniso_descent(p, ref, L, x, xbar);
  });
  m.def("check_precond_lipschitz", [](const Problem& p, const ReferenceFunction& ref, double L,
                                      const Vector& x, const Vector& xbar) {
    return check_precond_lipschitz(p, ref, L, x, xbar);
  });
  m.def("check_noise_majorization", [](const ReferenceFunction& ref, const Vector& y,
                                       const Vector& ybar) {
    return check_noise_majorization(ref, y, ybar);
  });
  m.def("check_grad_dominance", [](const Problem& p, const ReferenceFunction& ref, double mu,
                                   const Vector& x) { return check_grad_dominance(p, ref, mu, x); });
  m.def("check_seq_lemma", [](const Vector& delta, double alpha, double theta) {
    return check_seq_lemma(delta, alpha, theta);
  });
  m.def("bound_thm22", &bound_thm22);
  m.def("factor_thm24", &factor_thm24);
  m.def("bound_thm27", &bound_thm27);
  m.def("bound_thm31", &bound_thm31);
  m.def("bound_thm34", &bound_thm34);
  m.def("bound_thm35", &bound_thm35);
  m.def("noise_level_estimate", [](const FiniteSumProblem& oracle, const ReferenceFunction& ref,
                                   const std::vector<Vector>& xs, std::size_t batch,
                                   std::size_t draws, std::uint64_t seed) {
    return noise_level_estimate(oracle, ref, xs, batch, draws, seed);
  }, py::arg("oracle"), py::arg("ref"), py::arg("xs"), py::arg("batch") = 1,
     py::arg("draws") = 10000, py::arg("seed") = 0);

  m.def("suite_names", &suite_names);
  m.def("run_suite", [](const std::string& name, std::uint64_t seed) {
    SuiteContext ctx;
    ctx.seed = seed;
    py::gil_scoped_release release;
    return run_suite(name, ctx);
  }, py::arg("name"), py::arg("seed") = 0);

  // configuration
  m.def("parse_config_text", [](const std::string& text) {
    return emit_config(parse_config_text(text));
  }, "Validates a JSON config and returns its canonical form.");
  m.def("run_config", [](const std::string& text, const std::filesystem::path& out,
                         std::size_t jobs) {
    CommandOptions options;
    options.out = out;
    options.jobs = jobs;
    std::ostringstream log;
    const ExperimentConfig config = parse_config_text(text);
    int status;
    {
      py::gil_scoped_release release;
      status = cmd_run(config, options, log);
    }
    return status;
  }, py::arg("config"), py::arg("out"), py::arg("jobs") = 1,
     "Runs a JSON config into `out`; returns the exit status.");
}
