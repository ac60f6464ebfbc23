#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "emlab/experiment.hpp"
#include "emlab/version.hpp"

namespace emlab {
namespace {

std::filesystem::path TempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("emlab_experiment_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string Slurp(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json SmallErrorCurve(const std::string& drift) {
  return Json{{"kind", "error_curve"}, {"seed", 9},         {"drift", drift},
              {"levels", {8, 16, 32, 64}}, {"path_count", 200}, {"n_ref", 1024}};
}

TEST(Config, DefaultsAndEcho) {
  const ExperimentConfig c = ParseConfig(Json{{"kind", "error_curve"}});
  EXPECT_EQ(c.kind, ExperimentKind::kErrorCurve);
  EXPECT_EQ(c.error_curve.drift, "sign");
  EXPECT_EQ(c.error_curve.path_count, 10000u);
  const Json echo = EchoConfig(c);
  EXPECT_EQ(echo.at("n_ref"), 16384);
  EXPECT_FALSE(echo.contains("workers"));
  EXPECT_FALSE(echo.contains("output_dir"));
  // The echo is itself a config that echoes to the same document.
  EXPECT_EQ(EchoConfig(ParseConfig(echo)), echo);
}

TEST(Config, EchoRoundTripForEveryKind) {
  for (const char* kind : {"error_curve", "quadrature_w", "quadrature_em", "zvonkin", "pde", "kernel_blowup"}) {
    const Json echo = EchoConfig(ParseConfig(Json{{"kind", kind}, {"seed", 4}}));
    EXPECT_EQ(echo.at("kind"), kind);
    EXPECT_EQ(EchoConfig(ParseConfig(echo)), echo) << kind;
  }
}

TEST(Config, ReportsEveryProblem) {
  const Json bad{{"kind", "error_curve"},
                 {"drift", "wobble"},
                 {"levels", {64, 32}},
                 {"path_count", 5},
                 {"colour", "blue"},
                 {"seed", "seven"}};
  try {
    ParseConfig(bad);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string all = e.what();
    EXPECT_GE(e.problems().size(), 5u) << all;
    EXPECT_NE(all.find("colour"), std::string::npos);
    EXPECT_NE(all.find("seed"), std::string::npos);
    EXPECT_NE(all.find("wobble"), std::string::npos);
  }
  EXPECT_THROW(ParseConfig(Json{{"kind", "nonsense"}}), ConfigError);
  EXPECT_THROW(ParseConfig(Json::array()), ConfigError);
}

TEST(Pipeline, ZeroDriftIsExactWithoutFits) {
  ExperimentConfig c = ParseConfig(SmallErrorCurve("zero"));
  const RunOutcome out = emlab::Run(c, false);
  EXPECT_TRUE(out.document.at("results").at("exact").get<bool>());
  EXPECT_TRUE(out.document.at("rate_fits").empty());
  for (const auto& v : out.document.at("results").at("mse")) EXPECT_EQ(v.get<double>(), 0.0);
}

TEST(Pipeline, OutputsAreByteIdenticalAcrossRerunsAndWorkers) {
  ExperimentConfig c = ParseConfig(SmallErrorCurve("sign"));
  c.output_dir = TempDir("a");
  emlab::Run(c);
  c.output_dir = TempDir("b");
  c.workers = 3;
  emlab::Run(c);
  auto strip = [](Json doc) {
    doc.erase("wall_clock_seconds");
    return doc.dump();
  };
  const Json a = Json::parse(Slurp(TempDir("x").parent_path() / "emlab_experiment_test_a" / "results.json"));
  const Json b = Json::parse(Slurp(c.output_dir / "results.json"));
  EXPECT_EQ(strip(a), strip(b));
  const auto csv_a = Slurp(TempDir("x").parent_path() / "emlab_experiment_test_a" / "error_curve.csv");
  EXPECT_EQ(csv_a, Slurp(c.output_dir / "error_curve.csv"));
  EXPECT_EQ(csv_a.substr(0, csv_a.find('\n')), "n,mse,ci,estimator_variant");
  EXPECT_TRUE(a.at("rate_fits").contains("plain"));
  EXPECT_TRUE(a.at("rate_fits").contains("corrected"));
}

TEST(Pipeline, ReproduceDetectsPerturbationAndVersion) {
  const RunOutcome out = emlab::Run(ParseConfig(SmallErrorCurve("sin")), false);
  const Json recorded = Json::parse(out.document.dump());
  EXPECT_TRUE(Reproduce(recorded, 2).identical);

  Json perturbed = recorded;
  perturbed["results"]["mse"][2] = perturbed["results"]["mse"][2].get<double>() * (1 + 1e-15) + 1e-300;
  const ReproduceVerdict v = Reproduce(perturbed);
  EXPECT_FALSE(v.identical);
  ASSERT_EQ(v.mismatches.size(), 1u);
  EXPECT_EQ(v.mismatches[0], "/results/mse/2");

  Json old = recorded;
  old["version"] = "0.0.0-not-this";
  const ReproduceVerdict w = Reproduce(old);
  EXPECT_TRUE(w.version_mismatch);
  EXPECT_FALSE(w.identical);
  EXPECT_NE(w.recorded_version, kVersion);
}

TEST(Pipeline, SmallRunsOfEveryKind) {
  const auto dir = TempDir("kinds");
  struct Case {
    Json config;
    const char* csv;
    const char* header;
  };
  const Case cases[] = {
      {Json{{"kind", "quadrature_w"}, {"levels", {4, 8, 16, 32}}, {"path_count", 200}, {"finest_n", 256}},
       "scaling.csv", "n,q,ci"},
      {Json{{"kind", "quadrature_em"}, {"drift", "sign"}, {"levels", {4, 8, 16, 32}}, {"path_count", 200},
            {"finest_n", 256}},
       "scaling.csv", "n,q,ci"},
      {Json{{"kind", "zvonkin"}, {"drift", "sign"}, {"z", 0.3}, {"driftless", {{"path_count", 2000}, {"level", 256}}}},
       "scale_table.csv", "x,phi,phi_prime,psi"},
      {Json{{"kind", "pde"}, {"points", 257}, {"time_steps", 32}}, "grid_field.csv", "t,x,u,grad_u"},
      {Json{{"kind", "kernel_blowup"}, {"points", 513}, {"times", {0.04, 0.08, 0.16, 0.32}}}, "kernel_norms.csv",
       "k,t,l1_norm"},
  };
  for (const Case& k : cases) {
    ExperimentConfig c = ParseConfig(k.config);
    c.output_dir = dir;
    const RunOutcome out = emlab::Run(c);
    EXPECT_TRUE(out.failed_checks.empty()) << k.config.dump() << " " << out.document.at("results").dump();
    const std::string text = Slurp(dir / k.csv);
    EXPECT_EQ(text.substr(0, text.find('\n')), k.header) << k.csv;
    EXPECT_TRUE(std::filesystem::exists(dir / "results.json"));
  }
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, DumpPaths) {
  Json config = SmallErrorCurve("sign");
  config["dump_paths"] = 2;
  ExperimentConfig c = ParseConfig(config);
  c.output_dir = TempDir("paths");
  emlab::Run(c);
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "paths" / "path_1_n64.csv"));
  EXPECT_FALSE(std::filesystem::exists(c.output_dir / "paths" / "path_2_n64.csv"));
  std::filesystem::remove_all(c.output_dir);
}

}  // namespace
}  // namespace emlab
