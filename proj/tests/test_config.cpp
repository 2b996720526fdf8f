#include <gtest/gtest.h>

#include "nlpgm/config.hpp"

using namespace nlpgm;

namespace {

const char* kMinimal = R"({
  "problem": {"name": "selfcal_cosh", "dim": 2},
  "method": "npgm",
  "ref": {"kernel": "cosh", "shape": "isotropic"},
  "gamma": 1,
  "iterations": 100,
  "seeds": [0]
})";

std::string error_key(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

std::string with(const std::string& field) {
  // later duplicate keys win
  std::string s = kMinimal;
  s.insert(s.rfind('}'), ",\n  " + field);
  return s;
}

}  // namespace

TEST(Config, MinimalIsValidWithDefaults) {
  const ExperimentConfig c = parse_config_text(kMinimal);
  EXPECT_EQ(c.problem.name, "selfcal_cosh");
  EXPECT_EQ(c.problem.dim, 2u);
  EXPECT_EQ(c.ref.scale, 1.0);
  EXPECT_EQ(c.eval_every, 1u);
  EXPECT_EQ(c.beta, 0.0);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{0});
  EXPECT_FALSE(c.timing);
}

TEST(Config, MatrixFactorizationPaperSettings) {
  const ExperimentConfig c = parse_config_text(R"({
    "problem": {"name": "matrix_factorization", "source": "movielens",
                "data_path": "ml-100k/u.data", "rank": 10},
    "method": "mnpgm",
    "ref": {"kernel": "cosh", "shape": "isotropic", "scale": 100},
    "gamma": 2, "beta": 0.9, "iterations": 1000, "seeds": [0, 1, 2]
  })");
  EXPECT_EQ(c.problem.source, "movielens");
  EXPECT_EQ(c.ref.scale, 100.0);
  EXPECT_EQ(c.beta, 0.9);
}

TEST(Config, StochasticDefaultsToSparseLogging) {
  const ExperimentConfig c = parse_config_text(R"({
    "problem": {"name": "phase_retrieval", "n": 20, "m": 10},
    "method": "snpgm", "ref": {"kernel": "cosh", "scale": 1000},
    "gamma": 0.02, "batch": 5, "iterations": 100
  })");
  EXPECT_EQ(c.eval_every, 10u);
  EXPECT_EQ(c.problem.noise_variance, 16.0);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(error_key(with(R"("beta": 1.2)")), "beta");
  EXPECT_EQ(error_key(with(R"("bogus": 1)")), "bogus");
  EXPECT_EQ(error_key(with(R"("eval_every": 0)")), "eval_every");
  EXPECT_EQ(error_key(with(R"("batch": "ten")")), "batch");
  EXPECT_EQ(error_key(with(R"("seeds": [])")), "seeds");
  EXPECT_EQ(error_key(with(R"("method": "adam")")), "method");
  EXPECT_EQ(error_key(with(R"("method": "snpgm")")), "method");
  EXPECT_EQ(error_key(with(R"("ref": {"kernel": "huber"})")), "ref.kernel");
  EXPECT_EQ(error_key(with(R"("ref": {"kernel": "cosh", "size": 1})")), "ref.size");
  EXPECT_EQ(error_key(with(R"("ref": {"kernel": "cosh", "scale": 0})")), "ref.scale");
  EXPECT_EQ(error_key(with(R"("problem": {"name": "selfcal_cosh", "rank": 2})")), "problem.rank");
  EXPECT_EQ(error_key(with(R"("problem": {"name": "nope"})")), "problem.name");
  EXPECT_EQ(error_key(with(R"("init": {"kind": "point", "x0": [1]})")), "init.x0");
  EXPECT_EQ(error_key(R"({"method": "npgm", "gamma": 1, "iterations": 1})"), "problem");
  EXPECT_EQ(error_key(R"({"problem": {"name": "quadratic"}, "gamma": 1, "iterations": 1})"), "method");
  EXPECT_EQ(error_key("{not json"), "<root>");
  EXPECT_EQ(error_key(R"({
    "problem": {"name": "matrix_factorization", "rows": 4, "cols": 3, "rank": 3},
    "method": "gd", "gamma": 0.1, "iterations": 5})"), "problem.rank");
}

TEST(Config, CertificateConstraints) {
  const std::string mn = R"({
    "problem": {"name": "selfcal_cosh"}, "method": "mnpgm",
    "ref": {"kernel": "cosh"}, "gamma": 1, "iterations": 10, )";
  EXPECT_EQ(error_key(mn + R"("beta": 0.6, "certificates": ["thm22"]})"), "beta");
  EXPECT_EQ(error_key(mn + R"("beta": 0.4, "certificates": ["thm22"]})"), "<accepted>");
  EXPECT_EQ(error_key(mn + R"("beta": 0.0, "certificates": ["thm24"]})"), "beta");
  EXPECT_EQ(error_key(mn + R"("beta": 0.5, "certificates": ["thm27"]})"), "gamma");
  EXPECT_EQ(error_key(mn + R"("beta": 0.4, "eval_every": 2, "certificates": ["thm22"]})"),
            "eval_every");
  EXPECT_EQ(error_key(mn + R"("beta": 0.4, "certificates": ["thm99"]})"), "certificates");
  EXPECT_EQ(error_key(R"({"problem": {"name": "selfcal_cosh"}, "method": "npgm",
    "ref": {"kernel": "cosh"}, "gamma": 1.5, "iterations": 10, "certificates": ["thm22"]})"),
            "gamma");
  EXPECT_EQ(error_key(R"({"problem": {"name": "selfcal_cosh"}, "method": "npgm",
    "ref": {"kernel": "cosh", "scale": 2}, "gamma": 1, "iterations": 10, "certificates": ["thm22"]})"),
            "ref");
  EXPECT_EQ(error_key(R"({"problem": {"name": "selfcal_cosh"}, "method": "mnpgm",
    "ref": {"kernel": "cosh"}, "gamma": 0.25, "beta": 0.5, "iterations": 10,
    "certificates": ["thm27"]})"), "<accepted>");
}

TEST(Config, RoundTrip) {
  for (const std::string& text :
       {std::string(kMinimal),
        std::string(R"({"problem": {"name": "phase_retrieval", "n": 7, "m": 3, "data_seed": 4},
          "method": "clipped", "eta": 2.3e-05, "gamma_clip": 1, "gamma": 1, "batch": 2,
          "iterations": 9, "seeds": [3, 1], "init": {"kind": "normal", "mean": 5, "scale": 0.1},
          "timing": true, "output_dir": "out/pr"})"),
        std::string(R"({"problem": {"name": "quadratic", "dim": 3}, "method": "gdm",
          "gamma": 0.1, "beta": 0.9, "iterations": 4, "init": {"kind": "point", "x0": [1, 2, 3]},
          "ref": {"kernel": "log_barrier", "epsilon": 0.5, "shape": "separable"}})"),
        std::string(R"({"problem": {"name": "matrix_factorization", "rows": 5, "cols": 4,
          "rank": 2}, "method": "mnpgm", "gamma": 2, "beta": 0.9, "iterations": 3,
          "ref": {"scale": 100}})")}) {
    const ExperimentConfig c = parse_config_text(text);
    const std::string emitted = emit_config(c);
    EXPECT_EQ(parse_config_text(emitted), c) << emitted;
    EXPECT_EQ(emit_config(parse_config_text(emitted)), emitted);
  }
}

TEST(Config, RoundTripPreservesAwkwardDoubles) {
  ExperimentConfig c = parse_config_text(kMinimal);
  c.gamma = 1.0 / 3.0;
  c.ref.scale = 0.1 + 0.2;
  EXPECT_EQ(parse_config_text(emit_config(c)), c);
}

TEST(Config, SetHyperparameter) {
  ExperimentConfig c = parse_config_text(kMinimal);
  set_hyperparameter(c, "gamma", 0.5);
  set_hyperparameter(c, "ref.scale", 10);
  set_hyperparameter(c, "batch", 4);
  EXPECT_EQ(c.gamma, 0.5);
  EXPECT_EQ(c.ref.scale, 10.0);
  EXPECT_EQ(c.batch, 4u);
  EXPECT_THROW(set_hyperparameter(c, "iterations", 3), ConfigError);
  EXPECT_THROW(set_hyperparameter(c, "batch", 2.5), ConfigError);
}

TEST(Config, ValidateCatchesProgrammaticEdits) {
  ExperimentConfig c = parse_config_text(kMinimal);
  c.beta = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
  c.beta = 0.0;
  c.gamma = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, MissingFile) {
  EXPECT_THROW(parse_config("/nonexistent/config.json"), ConfigError);
}
