// emlab: run, reproduce and list Euler-Maruyama convergence experiments.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emlab/drift_catalog.hpp"
#include "emlab/error.hpp"
#include "emlab/experiment.hpp"
#include "emlab/quadrature_stats.hpp"
#include "emlab/version.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kNumerical = 3,
  kMismatch = 4,
  kVersionMismatch = 5,
};

void PrintFits(const emlab::Json& fits) {
  for (const char* variant : {"plain", "corrected", "time_max_plain"}) {
    if (!fits.contains(variant)) continue;
    const auto& fit = fits.at(variant);
    std::cout << "  fit " << variant << ": slope " << fit.at("slope").get<double>() << " +- "
              << fit.at("slope_std_error").get<double>() << "  (R^2 "
              << fit.at("r_squared").get<double>() << ")\n";
  }
  if (fits.contains("stability") && !fits.at("stability").at("stable").get<bool>()) {
    std::cout << "  warning: dropping the largest level moves the slope by more than 3 SE\n";
  }
}

void PrintSummary(const emlab::RunOutcome& outcome, const std::filesystem::path& dir) {
  const emlab::Json& doc = outcome.document;
  std::cout << "kind " << doc.at("kind").get<std::string>() << ", wrote " << (dir / "results.json").string()
            << " (" << doc.at("wall_clock_seconds").get<double>() << " s)\n";
  const emlab::Json& results = doc.at("results");
  if (results.contains("exact") && results.at("exact").get<bool>()) {
    std::cout << "  exact: every estimate is zero, no rate fit\n";
  }
  PrintFits(doc.at("rate_fits"));
  if (results.contains("checks")) {
    for (const auto& check : results.at("checks")) {
      std::cout << "  " << (check.at("passed").get<bool>() ? "PASS " : "FAIL ")
                << check.at("name").get<std::string>() << ": " << check.at("value").dump() << " vs "
                << check.at("tolerance").dump() << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Euler-Maruyama strong-convergence lab for SDEs with irregular drift"};
  app.set_version_flag("--version", std::string(emlab::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--workers", workers, "Worker threads (never changes results)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  std::string result_path;
  auto* reproduce = app.add_subcommand("reproduce", "Re-run a results.json and compare field by field");
  reproduce->add_option("results", result_path, "results.json produced by run")->required()->check(CLI::ExistingFile);
  reproduce->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* list_drifts = app.add_subcommand("list-drifts", "List builtin drifts");
  auto* list_functionals = app.add_subcommand("list-functionals", "List builtin test functionals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*list_drifts) {
      for (const auto& info : emlab::ListBuiltins()) {
        std::cout << info.identifier << "  [" << info.regularity << "]  " << info.formula << '\n';
      }
      return kOk;
    }
    if (*list_functionals) {
      for (const auto& info : emlab::ListFunctionals()) {
        std::cout << info.identifier << "  " << info.formula << '\n';
      }
      return kOk;
    }
    if (*run) {
      emlab::ExperimentConfig config = emlab::LoadConfig(config_path);
      if (seed) config.seed = *seed;
      if (!out_dir.empty()) config.output_dir = out_dir;
      config.workers = workers;
      const emlab::RunOutcome outcome = emlab::Run(config);
      PrintSummary(outcome, config.output_dir);
      if (!outcome.failed_checks.empty()) {
        std::cerr << "numerical checks failed:";
        for (const auto& name : outcome.failed_checks) std::cerr << ' ' << name;
        std::cerr << '\n';
        return kNumerical;
      }
      return kOk;
    }
    if (*reproduce) {
      std::ifstream in(result_path);
      emlab::Json recorded;
      try {
        recorded = emlab::Json::parse(in);
      } catch (const emlab::Json::parse_error& e) {
        std::cerr << "malformed results file: " << e.what() << '\n';
        return kValidation;
      }
      const emlab::ReproduceVerdict verdict = emlab::Reproduce(recorded, workers);
      if (verdict.version_mismatch) {
        std::cout << "version mismatch: results written by " << verdict.recorded_version
                  << ", this binary is " << emlab::kVersion << '\n';
        return kVersionMismatch;
      }
      if (verdict.identical) {
        std::cout << "identical\n";
        return kOk;
      }
      std::cout << "mismatch in " << verdict.mismatches.size() << " field(s):\n";
      for (const auto& field : verdict.mismatches) std::cout << "  " << field << '\n';
      return kMismatch;
    }
  } catch (const emlab::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kValidation;
  } catch (const emlab::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kValidation;
  } catch (const emlab::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
