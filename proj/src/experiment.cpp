#include "nlpgm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "nlpgm/certify.hpp"

namespace nlpgm {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// Minimal JSON emitter: 17 significant digits, null for non-finite numbers.
std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

std::string json_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

std::string json_optional_string(const std::string& s) { return s.empty() ? "null" : json_string(s); }

void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

double final_f(const RunOutcome& o) {
  if (!o.error.empty() || o.trace.records.empty()) return std::numeric_limits<double>::quiet_NaN();
  return o.trace.records.back().f;
}

double min_stationarity(const RunOutcome& o) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : o.trace.records) m = std::min(m, r.stationarity);
  return o.trace.records.empty() ? std::numeric_limits<double>::quiet_NaN() : m;
}

std::string outcome_json(const RunOutcome& o, const std::filesystem::path& base, const char* indent) {
  std::ostringstream s;
  s << indent << "{\"seed\": " << o.seed
    << ", \"csv\": " << json_string(std::filesystem::relative(o.csv, base).generic_string())
    << ", \"records\": " << o.trace.records.size() << ", \"final_f\": " << json_number(final_f(o))
    << ", \"min_stationarity\": " << json_number(min_stationarity(o))
    << ", \"aborted\": " << (o.trace.aborted ? "true" : "false")
    << ", \"abort_reason\": " << json_optional_string(o.trace.abort_reason)
    << ", \"error\": " << json_optional_string(o.error) << ", \"certificates\": [";
  for (std::size_t i = 0; i < o.certificates.size(); ++i) {
    const auto& c = o.certificates[i];
    s << (i ? ", " : "") << "{\"name\": " << json_string(c.name)
      << ", \"passed\": " << (c.passed() ? "true" : "false")
      << ", \"worst_residual\": " << json_number(c.worst_residual) << "}";
  }
  s << "]}";
  return s.str();
}

std::vector<RunOutcome> run_seeds(const ExperimentConfig& config, const std::filesystem::path& dir,
                                  std::size_t jobs) {
  std::filesystem::create_directories(dir);
  std::vector<RunOutcome> outcomes(config.seeds.size());
  run_parallel(config.seeds.size(), jobs, [&](std::size_t i) {
    RunOutcome o = execute_run(config, config.seeds[i]);
    o.csv = dir / ("trace_seed" + std::to_string(o.seed) + ".csv");
    std::ofstream out(o.csv, std::ios::binary);
    if (!out) {
      o.error = "cannot write " + o.csv.string();
    } else {
      write_trace_csv(o.trace, out);
      if (!out) o.error = "I/O error writing " + o.csv.string();
    }
    outcomes[i] = std::move(o);
  });
  return outcomes;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ExperimentConfig with_offset(ExperimentConfig config, std::uint64_t offset) {
  for (auto& s : config.seeds) s += offset;
  return config;
}

void log_outcome(std::ostream& log, const RunOutcome& o) {
  log << "seed " << o.seed << ": ";
  if (!o.error.empty()) {
    log << "error: " << o.error << "\n";
    return;
  }
  log << o.trace.records.size() << " records, final f = " << format_double(final_f(o));
  if (o.trace.aborted) log << " (aborted: " << o.trace.abort_reason << ")";
  for (const auto& c : o.certificates) log << ", " << c.name << (c.passed() ? " PASS" : " FAIL");
  log << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------

BuiltProblem build_problem(const ProblemSpec& spec, std::uint64_t run_seed) {
  BuiltProblem b;
  const std::uint64_t data_seed = spec.data_seed.value_or(run_seed);
  if (spec.name == "selfcal_cosh") {
    b.problem = make_selfcal_cosh(spec.dim);
  } else if (spec.name == "quadratic") {
    b.problem = std::make_shared<Quadratic>(spec.dim);
  } else if (spec.name == "noise_example") {
    auto p = make_noise_example();
    b.problem = p;
    b.oracle = p;
  } else if (spec.name == "matrix_factorization") {
    Matrix a = spec.source == "movielens" ? load_movielens(spec.data_path)
                                          : gaussian_matrix(spec.rows, spec.cols, data_seed);
    b.problem = make_matrix_factorization(std::move(a), spec.rank);
  } else if (spec.name == "phase_retrieval") {
    auto p = make_phase_retrieval(spec.n, spec.m, data_seed, spec.noise_variance);
    b.problem = p;
    b.oracle = p;
  } else {
    throw std::invalid_argument("unknown problem '" + spec.name + "'");
  }
  return b;
}

ReferenceFunction build_reference(const RefSpec& spec) {
  std::vector<double> params;
  if (spec.kernel == "log_barrier") params.push_back(spec.epsilon);
  return ReferenceFunction(make_kernel(spec.kernel, params), shape_from_string(spec.shape),
                           spec.scale);
}

Vector initial_point(const ExperimentConfig& config, const Problem& problem, std::uint64_t seed) {
  const InitSpec& init = config.init;
  if (init.kind == "point") {
    if (init.x0.size() != problem.dim())
      throw std::invalid_argument("init.x0 has " + std::to_string(init.x0.size()) +
                                  " entries, problem dimension is " + std::to_string(problem.dim()));
    return init.x0;
  }
  double mean = 0.0, scale = 1.0;
  if (init.kind == "normal") {
    mean = init.mean;
    scale = init.scale;
  } else if (config.problem.name == "matrix_factorization") {
    scale = 1.0 / std::sqrt(static_cast<double>(config.problem.rank));
  } else if (config.problem.name == "phase_retrieval") {
    mean = 5.0;
    scale = std::sqrt(0.5);
  }
  CounterRng rng(seed, Stream::init);
  Vector x(problem.dim());
  for (double& v : x) v = mean + scale * rng.normal();
  return x;
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << kTraceHeader << "\n";
  for (const auto& r : trace.records) {
    out << r.k << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.stationarity) << ',';
    if (r.lyapunov) out << format_double(*r.lyapunov);
    out << ',';
    if (r.elapsed_ns) out << *r.elapsed_ns;
    out << '\n';
  }
}

bool RunOutcome::ok() const {
  if (!error.empty() || trace.aborted) return false;
  return std::all_of(certificates.begin(), certificates.end(),
                     [](const CheckReport& c) { return c.passed(); });
}

RunOutcome execute_run(const ExperimentConfig& config, std::uint64_t seed) {
  RunOutcome o;
  o.seed = seed;
  try {
    const BuiltProblem built = build_problem(config.problem, seed);
    const Problem& f = *built.problem;
    const ReferenceFunction ref = build_reference(config.ref);
    const Vector x0 = initial_point(config, f, seed);
    const RunSettings settings = run_settings(config);
    o.trace = run(f, built.oracle.get(), ref, settings, x0, seed);
    o.trace.config_echo = emit_config(config);

    if (!config.certificates.empty()) {
      const double f_star = f.f_star().value();
      const double L = f.aniso_constant().value();
      const double gap = f.value(x0) - f_star;
      const double beta = settings.method == Method::npgm ? 0.0 : settings.beta;
      for (const std::string& name : config.certificates) {
        CheckReport r;
        if (name == "thm22") {
          r = to_report(certify_thm22_trace(o.trace, L, settings.gamma * L, beta, gap));
        } else if (name == "thm24") {
          r = to_report(certify_thm24_trace(o.trace, beta, settings.gamma,
                                            f.dominance_constant().value(), gap, f_star));
          o.certificates.push_back(r);
          r = certify_thm24_lyapunov(o.trace, beta, settings.gamma, f.dominance_constant().value());
        } else {
          r = to_report(certify_thm27_trace(o.trace, beta, settings.gamma, gap,
                                            ref.stationarity(f.gradient(x0))));
        }
        o.certificates.push_back(std::move(r));
      }
    }
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

int cmd_run(const ExperimentConfig& raw, const CommandOptions& options, std::ostream& log) {
  const ExperimentConfig config = with_offset(raw, options.seed_offset);
  const std::filesystem::path dir = options.out.value_or(config.output_dir);
  const auto outcomes = run_seeds(config, dir, options.jobs);
  write_text(dir / "config.json", emit_config(config));

  bool ok = true;
  std::ostringstream s;
  s << "{\n  \"command\": \"run\",\n  \"runs\": [\n";
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    s << outcome_json(outcomes[i], dir, "    ") << (i + 1 < outcomes.size() ? ",\n" : "\n");
    ok = ok && outcomes[i].ok();
    log_outcome(log, outcomes[i]);
  }
  s << "  ],\n  \"ok\": " << (ok ? "true" : "false") << "\n}\n";
  write_text(dir / "summary.json", s.str());
  log << "wrote " << outcomes.size() << " trace(s) to " << dir.string() << "\n";
  return ok ? 0 : 1;
}

GridAxis parse_grid_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("grid axis '" + text + "' must look like key=v1,v2,...");
  GridAxis axis;
  axis.key = text.substr(0, eq);
  std::stringstream values(text.substr(eq + 1));
  std::string item;
  while (std::getline(values, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size())
      throw std::invalid_argument("grid value '" + item + "' for " + axis.key + " is not a number");
    axis.values.push_back(v);
  }
  if (axis.values.empty()) throw std::invalid_argument("grid axis '" + axis.key + "' has no values");
  return axis;
}

int cmd_sweep(const ExperimentConfig& raw, const std::vector<GridAxis>& grid,
              const CommandOptions& options, std::ostream& log) {
  if (grid.empty()) throw std::invalid_argument("sweep needs at least one --grid axis");
  for (const auto& axis : grid)
    if (axis.values.empty()) throw std::invalid_argument("grid axis '" + axis.key + "' is empty");

  const ExperimentConfig base = with_offset(raw, options.seed_offset);
  const std::filesystem::path dir = options.out.value_or(base.output_dir);

  // expand the cross product; the last axis varies fastest
  std::vector<std::vector<double>> points{{}};
  for (const auto& axis : grid) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points)
      for (double v : axis.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  std::vector<ExperimentConfig> configs;
  for (const auto& p : points) {
    ExperimentConfig c = base;
    for (std::size_t a = 0; a < grid.size(); ++a) set_hyperparameter(c, grid[a].key, p[a]);
    validate(c);
    configs.push_back(std::move(c));
  }

  std::filesystem::create_directories(dir);
  const std::size_t seeds = base.seeds.size();
  std::vector<std::vector<RunOutcome>> outcomes(configs.size(), std::vector<RunOutcome>(seeds));
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto sub = dir / ("point_" + std::to_string(i));
    std::filesystem::create_directories(sub);
    write_text(sub / "config.json", emit_config(configs[i]));
  }
  run_parallel(configs.size() * seeds, options.jobs, [&](std::size_t t) {
    const std::size_t i = t / seeds, j = t % seeds;
    const auto sub = dir / ("point_" + std::to_string(i));
    ExperimentConfig single = configs[i];
    single.seeds = {configs[i].seeds[j]};
    outcomes[i][j] = std::move(run_seeds(single, sub, 1).front());
  });

  std::vector<double> mean_f(configs.size());
  bool ok = true;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    double s = 0.0;
    for (const auto& o : outcomes[i]) {
      s += final_f(o);
      ok = ok && o.ok();
    }
    mean_f[i] = s / static_cast<double>(seeds);
  }
  std::vector<std::size_t> ranking(configs.size());
  std::iota(ranking.begin(), ranking.end(), std::size_t{0});
  std::stable_sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
    const bool fa = std::isfinite(mean_f[a]), fb = std::isfinite(mean_f[b]);
    if (fa != fb) return fa;
    return fa && mean_f[a] < mean_f[b];
  });

  std::ostringstream s;
  s << "{\n  \"command\": \"sweep\",\n  \"points\": [\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    s << "    {\"index\": " << i << ", \"dir\": " << json_string("point_" + std::to_string(i))
      << ", \"params\": {";
    for (std::size_t a = 0; a < grid.size(); ++a)
      s << (a ? ", " : "") << json_string(grid[a].key) << ": " << json_number(points[i][a]);
    s << "}, \"mean_final_f\": " << json_number(mean_f[i]) << ", \"runs\": [\n";
    for (std::size_t j = 0; j < seeds; ++j)
      s << outcome_json(outcomes[i][j], dir, "      ") << (j + 1 < seeds ? ",\n" : "\n");
    s << "    ]}" << (i + 1 < configs.size() ? ",\n" : "\n");
  }
  s << "  ],\n  \"ranking\": [";
  for (std::size_t r = 0; r < ranking.size(); ++r) s << (r ? ", " : "") << ranking[r];
  s << "],\n  \"ok\": " << (ok ? "true" : "false") << "\n}\n";
  write_text(dir / "summary.json", s.str());

  log << "rank  point  mean_final_f";
  for (const auto& axis : grid) log << "  " << axis.key;
  log << "\n";
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const std::size_t i = ranking[r];
    log << r + 1 << "  " << i << "  " << format_double(mean_f[i]);
    for (std::size_t a = 0; a < grid.size(); ++a) log << "  " << format_double(points[i][a]);
    log << "\n";
  }
  return ok ? 0 : 1;
}

std::string report_line(const CheckReport& r) {
  std::ostringstream s;
  s << (r.passed() ? "PASS " : "FAIL ") << r.name << " samples=" << r.samples
    << " worst_residual=" << format_double(r.worst_residual)
    << " tolerance=" << format_double(r.tolerance);
  if (r.precondition_failed) s << " precondition_failed";
  if (!r.witnesses.empty()) s << " witnesses=" << r.witnesses.size();
  if (!r.note.empty()) s << " note=\"" << r.note << "\"";
  return s.str();
}

int cmd_verify(const std::vector<std::string>& suites, const VerifyOptions& options,
               std::ostream& log) {
  if (suites.empty()) throw std::invalid_argument("verify needs at least one suite name");
  const auto& known = suite_names();
  for (const auto& s : suites)
    if (s != "all" && std::find(known.begin(), known.end(), s) == known.end())
      throw std::invalid_argument("unknown suite '" + s + "'");

  SuiteContext context;
  context.seed = options.seed;
  if (options.perturb_dual != 0.0)
    for (Kernel& k : context.kernels) k = perturb_dual_map(std::move(k), options.perturb_dual);

  std::vector<CheckReport> reports;
  for (const auto& s : suites) {
    auto part = run_suite(s, context);
    reports.insert(reports.end(), part.begin(), part.end());
  }

  std::filesystem::create_directories(options.out);
  std::ostringstream text, summary;
  bool ok = true;
  summary << "{\n  \"command\": \"verify\",\n  \"reports\": [\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    ok = ok && r.passed();
    const std::string line = report_line(r);
    text << line << "\n";
    log << line << "\n";
    summary << "    {\"name\": " << json_string(r.name)
            << ", \"passed\": " << (r.passed() ? "true" : "false") << ", \"samples\": " << r.samples
            << ", \"worst_residual\": " << json_number(r.worst_residual)
            << ", \"tolerance\": " << json_number(r.tolerance)
            << ", \"precondition_failed\": " << (r.precondition_failed ? "true" : "false")
            << ", \"note\": " << json_optional_string(r.note) << ", \"witnesses\": [";
    for (std::size_t w = 0; w < r.witnesses.size(); ++w) {
      summary << (w ? ", " : "") << "{\"residual\": " << json_number(r.witnesses[w].residual)
              << ", \"point\": [";
      for (std::size_t j = 0; j < r.witnesses[w].point.size(); ++j)
        summary << (j ? ", " : "") << json_number(r.witnesses[w].point[j]);
      summary << "]}";
    }
    summary << "]}" << (i + 1 < reports.size() ? ",\n" : "\n");
  }
  summary << "  ],\n  \"ok\": " << (ok ? "true" : "false") << "\n}\n";
  write_text(options.out / "report.txt", text.str());
  write_text(options.out / "summary.json", summary.str());
  log << (ok ? "all " : "") << reports.size() << " report(s), "
      << std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.passed(); })
      << " failed\n";
  return ok ? 0 : 1;
}

int cmd_ingest_movielens(const std::filesystem::path& path, std::ostream& out) {
  const Matrix a = load_movielens(path);
  out << "{\"rows\": " << a.rows << ", \"cols\": " << a.cols << ", \"nonzeros\": " << a.nonzeros()
      << "}\n";
  return 0;
}

}  // namespace nlpgm
