#include "nlpgm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nlpgm {

using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kProblems{"selfcal_cosh", "quadratic", "noise_example",
                                      "matrix_factorization", "phase_retrieval"};
const std::set<std::string> kKernels{"quadratic", "cosh", "log_barrier", "circular"};
const std::set<std::string> kCertificates{"thm22", "thm24", "thm27"};

bool finite_sum(const std::string& problem) {
  return problem == "noise_example" || problem == "phase_retrieval";
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(join(prefix, it.key()), "unknown key");
}

const json& require(const json& obj, const std::string& key, const std::string& prefix) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(prefix, key), "missing required key");
  return *it;
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

std::uint64_t as_uint(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) throw ConfigError(path, "expected a non-negative integer");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError(path, "expected a non-negative integer");
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

template <typename T, typename F>
void optional_field(const json& obj, const std::string& key, const std::string& prefix, T& out,
                    F convert) {
  auto it = obj.find(key);
  if (it != obj.end()) out = static_cast<T>(convert(*it, join(prefix, key)));
}

std::optional<double> aniso_constant_of(const std::string& problem) {
  if (problem == "selfcal_cosh") return 1.0;
  if (problem == "noise_example") return 3.0;
  return std::nullopt;
}

ProblemSpec parse_problem(const json& v) {
  const std::string prefix = "problem";
  if (!v.is_object()) throw ConfigError(prefix, "expected an object");
  ProblemSpec p;
  p.name = as_string(require(v, "name", prefix), "problem.name");
  if (!kProblems.count(p.name)) throw ConfigError("problem.name", "unknown problem '" + p.name + "'");
  if (p.name == "selfcal_cosh" || p.name == "quadratic") {
    reject_unknown(v, {"name", "dim"}, prefix);
    optional_field(v, "dim", prefix, p.dim, as_uint);
  } else if (p.name == "noise_example") {
    reject_unknown(v, {"name"}, prefix);
    p.dim = 1;
  } else if (p.name == "matrix_factorization") {
    reject_unknown(v, {"name", "source", "data_path", "rows", "cols", "rank", "data_seed"}, prefix);
    optional_field(v, "source", prefix, p.source, as_string);
    p.rank = as_uint(require(v, "rank", prefix), "problem.rank");
    if (p.source == "gaussian") {
      p.rows = as_uint(require(v, "rows", prefix), "problem.rows");
      p.cols = as_uint(require(v, "cols", prefix), "problem.cols");
      if (v.contains("data_path")) throw ConfigError("problem.data_path", "only valid with source movielens");
    } else if (p.source == "movielens") {
      p.data_path = as_string(require(v, "data_path", prefix), "problem.data_path");
      if (v.contains("rows") || v.contains("cols"))
        throw ConfigError("problem.rows", "shape comes from the data file");
    } else {
      throw ConfigError("problem.source", "expected gaussian or movielens");
    }
    if (v.contains("data_seed")) p.data_seed = as_uint(v["data_seed"], "problem.data_seed");
  } else {
    reject_unknown(v, {"name", "n", "m", "noise_variance", "data_seed"}, prefix);
    p.n = as_uint(require(v, "n", prefix), "problem.n");
    p.m = as_uint(require(v, "m", prefix), "problem.m");
    optional_field(v, "noise_variance", prefix, p.noise_variance, as_double);
    if (v.contains("data_seed")) p.data_seed = as_uint(v["data_seed"], "problem.data_seed");
  }
  return p;
}

RefSpec parse_ref(const json& v) {
  if (!v.is_object()) throw ConfigError("ref", "expected an object");
  reject_unknown(v, {"kernel", "shape", "scale", "epsilon"}, "ref");
  RefSpec r;
  optional_field(v, "kernel", "ref", r.kernel, as_string);
  optional_field(v, "shape", "ref", r.shape, as_string);
  optional_field(v, "scale", "ref", r.scale, as_double);
  optional_field(v, "epsilon", "ref", r.epsilon, as_double);
  return r;
}

InitSpec parse_init(const json& v) {
  if (!v.is_object()) throw ConfigError("init", "expected an object");
  InitSpec s;
  optional_field(v, "kind", "init", s.kind, as_string);
  if (s.kind == "default") {
    reject_unknown(v, {"kind"}, "init");
  } else if (s.kind == "normal") {
    reject_unknown(v, {"kind", "mean", "scale"}, "init");
    optional_field(v, "mean", "init", s.mean, as_double);
    optional_field(v, "scale", "init", s.scale, as_double);
  } else if (s.kind == "point") {
    reject_unknown(v, {"kind", "x0"}, "init");
    const json& x0 = require(v, "x0", "init");
    if (!x0.is_array()) throw ConfigError("init.x0", "expected an array of numbers");
    for (std::size_t i = 0; i < x0.size(); ++i)
      s.x0.push_back(as_double(x0[i], "init.x0[" + std::to_string(i) + "]"));
  } else {
    throw ConfigError("init.kind", "expected default, normal or point");
  }
  return s;
}

void require_positive(double v, const char* key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be a positive finite number");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("<root>", "expected an object");
  reject_unknown(root,
                 {"problem", "method", "ref", "gamma", "beta", "batch", "iterations", "eval_every",
                  "eta", "gamma_clip", "seeds", "output_dir", "init", "certificates", "timing"},
                 "");

  ExperimentConfig c;
  c.problem = parse_problem(require(root, "problem", ""));
  c.method = as_string(require(root, "method", ""), "method");
  if (root.contains("ref")) c.ref = parse_ref(root["ref"]);
  c.gamma = as_double(require(root, "gamma", ""), "gamma");
  c.iterations = as_uint(require(root, "iterations", ""), "iterations");
  optional_field(root, "beta", "", c.beta, as_double);
  optional_field(root, "batch", "", c.batch, as_uint);
  optional_field(root, "eta", "", c.eta, as_double);
  optional_field(root, "gamma_clip", "", c.gamma_clip, as_double);
  optional_field(root, "output_dir", "", c.output_dir, as_string);

  bool stochastic = false;
  try {
    stochastic = is_stochastic(method_from_string(c.method));
  } catch (const std::invalid_argument&) {
    throw ConfigError("method", "unknown method '" + c.method + "'");
  }
  c.eval_every = stochastic ? 10 : 1;
  optional_field(root, "eval_every", "", c.eval_every, as_uint);

  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    if (!s.is_array()) throw ConfigError("seeds", "expected an array of integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i)
      c.seeds.push_back(as_uint(s[i], "seeds[" + std::to_string(i) + "]"));
  }
  if (root.contains("init")) c.init = parse_init(root["init"]);
  if (root.contains("certificates")) {
    const json& s = root["certificates"];
    if (!s.is_array()) throw ConfigError("certificates", "expected an array of names");
    for (std::size_t i = 0; i < s.size(); ++i)
      c.certificates.push_back(as_string(s[i], "certificates[" + std::to_string(i) + "]"));
  }
  if (root.contains("timing")) {
    if (!root["timing"].is_boolean()) throw ConfigError("timing", "expected true or false");
    c.timing = root["timing"].get<bool>();
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate(const ExperimentConfig& c) {
  const ProblemSpec& p = c.problem;
  if (!kProblems.count(p.name)) throw ConfigError("problem.name", "unknown problem '" + p.name + "'");
  if ((p.name == "selfcal_cosh" || p.name == "quadratic") && p.dim < 1)
    throw ConfigError("problem.dim", "must be >= 1");
  if (p.name == "matrix_factorization") {
    if (p.rank < 1) throw ConfigError("problem.rank", "must be >= 1");
    if (p.source == "gaussian") {
      if (p.rows < 1) throw ConfigError("problem.rows", "must be >= 1");
      if (p.cols < 1) throw ConfigError("problem.cols", "must be >= 1");
      if (p.rank >= std::min(p.rows, p.cols))
        throw ConfigError("problem.rank", "must satisfy rank < min(rows, cols)");
    } else if (p.source == "movielens") {
      if (p.data_path.empty()) throw ConfigError("problem.data_path", "must not be empty");
    } else {
      throw ConfigError("problem.source", "expected gaussian or movielens");
    }
  }
  if (p.name == "phase_retrieval") {
    if (p.n < 1) throw ConfigError("problem.n", "must be >= 1");
    if (p.m < 1) throw ConfigError("problem.m", "must be >= 1");
    if (!(p.noise_variance >= 0.0) || !std::isfinite(p.noise_variance))
      throw ConfigError("problem.noise_variance", "must be a non-negative finite number");
  }

  Method method;
  try {
    method = method_from_string(c.method);
  } catch (const std::invalid_argument&) {
    throw ConfigError("method", "unknown method '" + c.method + "'");
  }
  if (is_stochastic(method) && !finite_sum(p.name))
    throw ConfigError("method", c.method + " needs a stochastic problem (noise_example, phase_retrieval)");

  if (!kKernels.count(c.ref.kernel)) throw ConfigError("ref.kernel", "unknown kernel '" + c.ref.kernel + "'");
  if (c.ref.shape != "isotropic" && c.ref.shape != "separable")
    throw ConfigError("ref.shape", "expected isotropic or separable");
  require_positive(c.ref.scale, "ref.scale");
  require_positive(c.ref.epsilon, "ref.epsilon");

  require_positive(c.gamma, "gamma");
  if (!(c.beta >= 0.0 && c.beta < 1.0)) throw ConfigError("beta", "must lie in [0, 1)");
  if (c.batch < 1) throw ConfigError("batch", "must be >= 1");
  if (c.iterations < 1) throw ConfigError("iterations", "must be >= 1");
  if (c.eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
  require_positive(c.eta, "eta");
  require_positive(c.gamma_clip, "gamma_clip");
  if (c.seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  if (c.init.kind == "normal") {
    if (!std::isfinite(c.init.mean)) throw ConfigError("init.mean", "must be finite");
    if (!(c.init.scale >= 0.0) || !std::isfinite(c.init.scale))
      throw ConfigError("init.scale", "must be a non-negative finite number");
  } else if (c.init.kind == "point") {
    std::optional<std::size_t> dim;
    if (p.name == "selfcal_cosh" || p.name == "quadratic" || p.name == "noise_example") dim = p.dim;
    if (p.name == "phase_retrieval") dim = p.n;
    if (p.name == "matrix_factorization" && p.source == "gaussian") dim = (p.rows + p.cols) * p.rank;
    if (dim && c.init.x0.size() != *dim)
      throw ConfigError("init.x0", "expected " + std::to_string(*dim) + " entries, got " +
                                       std::to_string(c.init.x0.size()));
  } else if (c.init.kind != "default") {
    throw ConfigError("init.kind", "expected default, normal or point");
  }

  for (const std::string& cert : c.certificates) {
    if (!kCertificates.count(cert)) throw ConfigError("certificates", "unknown certificate '" + cert + "'");
    if (method != Method::npgm && method != Method::mnpgm)
      throw ConfigError("method", cert + " certifies npgm or mnpgm runs only");
    if (c.ref.kernel != "cosh" || c.ref.shape != "isotropic" || c.ref.scale != 1.0)
      throw ConfigError("ref", cert + " needs the cosh isotropic reference with scale 1");
    if (c.eval_every != 1) throw ConfigError("eval_every", cert + " needs every iterate logged");
    const auto L = aniso_constant_of(p.name);
    if (!L) throw ConfigError("problem.name", cert + " needs a problem with known constants");
    const double beta = method == Method::npgm ? 0.0 : c.beta;
    if (cert == "thm22") {
      if (beta >= 0.5) throw ConfigError("beta", "thm22 requires beta < 0.5");
      if (c.gamma * *L > 1.0) throw ConfigError("gamma", "thm22 requires gamma <= 1/L");
    } else if (cert == "thm24") {
      if (p.name != "selfcal_cosh") throw ConfigError("problem.name", "thm24 needs a known dominance constant");
      if (!(beta > 0.0 && beta < 0.5)) throw ConfigError("beta", "thm24 requires beta in (0, 0.5)");
      if (c.gamma * *L > 1.0) throw ConfigError("gamma", "thm24 requires gamma <= 1/L");
    } else {
      if (p.name != "selfcal_cosh")
        throw ConfigError("problem.name", "thm27 needs a known preconditioned Lipschitz constant");
      if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta", "thm27 requires beta in (0, 1)");
      const double want = (1.0 - beta) * (1.0 - beta) / *L;
      if (std::abs(c.gamma - want) > 1e-12 * want)
        throw ConfigError("gamma", "thm27 requires gamma = (1 - beta)^2 / L");
    }
  }
}

std::string emit_config(const ExperimentConfig& c) {
  json root;
  json p;
  p["name"] = c.problem.name;
  if (c.problem.name == "selfcal_cosh" || c.problem.name == "quadratic") p["dim"] = c.problem.dim;
  if (c.problem.name == "matrix_factorization") {
    p["source"] = c.problem.source;
    if (c.problem.source == "movielens") {
      p["data_path"] = c.problem.data_path;
    } else {
      p["rows"] = c.problem.rows;
      p["cols"] = c.problem.cols;
    }
    p["rank"] = c.problem.rank;
  }
  if (c.problem.name == "phase_retrieval") {
    p["n"] = c.problem.n;
    p["m"] = c.problem.m;
    p["noise_variance"] = c.problem.noise_variance;
  }
  if (c.problem.data_seed) p["data_seed"] = *c.problem.data_seed;
  root["problem"] = p;
  root["method"] = c.method;
  root["ref"] = {{"kernel", c.ref.kernel},
                 {"shape", c.ref.shape},
                 {"scale", c.ref.scale},
                 {"epsilon", c.ref.epsilon}};
  root["gamma"] = c.gamma;
  root["beta"] = c.beta;
  root["batch"] = c.batch;
  root["iterations"] = c.iterations;
  root["eval_every"] = c.eval_every;
  root["eta"] = c.eta;
  root["gamma_clip"] = c.gamma_clip;
  root["seeds"] = c.seeds;
  root["output_dir"] = c.output_dir;
  json init{{"kind", c.init.kind}};
  if (c.init.kind == "normal") {
    init["mean"] = c.init.mean;
    init["scale"] = c.init.scale;
  } else if (c.init.kind == "point") {
    init["x0"] = c.init.x0;
  }
  root["init"] = init;
  root["certificates"] = c.certificates;
  root["timing"] = c.timing;
  return root.dump(2) + "\n";
}

RunSettings run_settings(const ExperimentConfig& c) {
  RunSettings s;
  s.method = method_from_string(c.method);
  s.gamma = c.gamma;
  s.beta = c.beta;
  s.batch = c.batch;
  s.iterations = c.iterations;
  s.eval_every = c.eval_every;
  s.eta = c.eta;
  s.gamma_clip = c.gamma_clip;
  s.timing = c.timing;
  return s;
}

void set_hyperparameter(ExperimentConfig& c, const std::string& key, double value) {
  if (key == "gamma") {
    c.gamma = value;
  } else if (key == "beta") {
    c.beta = value;
  } else if (key == "eta") {
    c.eta = value;
  } else if (key == "gamma_clip") {
    c.gamma_clip = value;
  } else if (key == "ref.scale") {
    c.ref.scale = value;
  } else if (key == "batch") {
    if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("batch", "must be an integer >= 1");
    c.batch = static_cast<std::size_t>(value);
  } else {
    throw ConfigError(key, "cannot be swept (gamma, beta, eta, gamma_clip, batch, ref.scale)");
  }
}

}  // namespace nlpgm
