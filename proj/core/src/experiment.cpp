#include "emlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "emlab/coupled_error.hpp"
#include "emlab/csv.hpp"
#include "emlab/drift_catalog.hpp"
#include "emlab/em_engine.hpp"
#include "emlab/kolmogorov.hpp"
#include "emlab/quadrature_stats.hpp"
#include "emlab/rate_analysis.hpp"
#include "emlab/rng_paths.hpp"
#include "emlab/version.hpp"
#include "emlab/zvonkin.hpp"

namespace emlab {
namespace {

std::string JoinProblems(const std::vector<std::string>& problems) {
  std::string message = "invalid configuration:";
  for (const std::string& p : problems) message += "\n  - " + p;
  return message;
}

// Typed access to one JSON object; records problems instead of throwing and
// reports keys that were never read.
class Reader {
 public:
  Reader(const Json& object, std::string where, std::vector<std::string>& problems)
      : object_(object), where_(std::move(where)), problems_(problems) {
    if (!object_.is_object()) problems_.push_back(where_ + " must be a JSON object");
  }

  template <class T>
  void Get(const char* key, T& target) {
    const Json* value = Find(key);
    if (value == nullptr) return;
    if (!Convert(*value, target)) problems_.push_back(Name(key) + ": " + Expected<T>());
  }

  const Json* Sub(const char* key) {
    const Json* value = Find(key);
    if (value != nullptr && !value->is_object()) {
      problems_.push_back(Name(key) + ": expected an object");
      return nullptr;
    }
    return value;
  }

  void Finish() {
    if (!object_.is_object()) return;
    for (const auto& item : object_.items()) {
      if (!used_.contains(item.key())) problems_.push_back("unknown key " + Name(item.key().c_str()));
    }
  }

 private:
  const Json* Find(const char* key) {
    used_.insert(key);
    if (!object_.is_object()) return nullptr;
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }
  std::string Name(const char* key) const { return where_.empty() ? std::string(key) : where_ + "." + key; }

  static bool Convert(const Json& v, double& out) {
    if (!v.is_number()) return false;
    out = v.get<double>();
    return true;
  }
  static bool Convert(const Json& v, bool& out) {
    if (!v.is_boolean()) return false;
    out = v.get<bool>();
    return true;
  }
  static bool Convert(const Json& v, std::string& out) {
    if (!v.is_string()) return false;
    out = v.get<std::string>();
    return true;
  }
  static bool Convert(const Json& v, int& out) {
    if (!v.is_number_integer()) return false;
    const auto wide = v.get<std::int64_t>();
    if (wide < INT32_MIN || wide > INT32_MAX) return false;
    out = static_cast<int>(wide);
    return true;
  }
  static bool Convert(const Json& v, std::int64_t& out) {
    if (!v.is_number_integer()) return false;
    out = v.get<std::int64_t>();
    return true;
  }
  static bool Convert(const Json& v, std::uint64_t& out) {
    if (v.is_number_unsigned()) {
      out = v.get<std::uint64_t>();
      return true;
    }
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) return false;
    out = static_cast<std::uint64_t>(v.get<std::int64_t>());
    return true;
  }
  static bool Convert(const Json& v, std::optional<double>& out) {
    if (v.is_null()) {
      out.reset();
      return true;
    }
    double value = 0.0;
    if (!Convert(v, value)) return false;
    out = value;
    return true;
  }
  template <class T>
  static bool Convert(const Json& v, std::vector<T>& out) {
    if (!v.is_array()) return false;
    std::vector<T> result;
    for (const Json& element : v) {
      T item{};
      if (!Convert(element, item)) return false;
      result.push_back(item);
    }
    out = std::move(result);
    return true;
  }

  template <class T>
  static std::string Expected() {
    if constexpr (std::is_same_v<T, double> || std::is_same_v<T, std::optional<double>>) {
      return "expected a number";
    } else if constexpr (std::is_same_v<T, bool>) {
      return "expected true or false";
    } else if constexpr (std::is_same_v<T, std::string>) {
      return "expected a string";
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      return "expected a nonnegative integer";
    } else if constexpr (std::is_integral_v<T>) {
      return "expected an integer";
    } else {
      return "expected an array of numbers";
    }
  }

  const Json& object_;
  std::string where_;
  std::vector<std::string>& problems_;
  std::set<std::string> used_;
};

std::optional<ExperimentKind> ParseKind(const std::string& text) {
  for (ExperimentKind kind : {ExperimentKind::kErrorCurve, ExperimentKind::kQuadratureW,
                              ExperimentKind::kQuadratureEm, ExperimentKind::kZvonkin,
                              ExperimentKind::kPde, ExperimentKind::kKernelBlowup}) {
    if (text == ToString(kind)) return kind;
  }
  return std::nullopt;
}

struct Source {
  SourceFn fn;
  double sup = 1.0;
};

Source ParseSource(const std::string& text) {
  if (text == "one") {
    return {[](double, std::span<const double>) { return 1.0; }, 1.0};
  }
  if (text == "sign") {
    return {[](double, std::span<const double> x) {
              return x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
            },
            1.0};
  }
  const std::string prefix = "gaussian_bump(";
  if (text.starts_with(prefix) && text.ends_with(")")) {
    const std::string inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    std::size_t used = 0;
    double sigma = 0.0;
    try {
      sigma = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != inner.size() || !(sigma > 0.0)) {
      throw InvalidArgument("gaussian_bump needs a positive width, got '" + inner + "'");
    }
    return {[sigma](double, std::span<const double> x) {
              double r2 = 0.0;
              for (double xi : x) r2 += xi * xi;
              return std::exp(-r2 / (2.0 * sigma * sigma));
            },
            1.0};
  }
  throw InvalidArgument("unknown PDE source '" + text + "' (one | sign | gaussian_bump(sigma))");
}

std::optional<ReferenceKind> ResolveReference(const std::string& text) {
  if (text == "default") return std::nullopt;
  return ParseReferenceKind(text);
}

ErrorCurveConfig ToErrorCurveConfig(const ExperimentConfig& c) {
  const ErrorCurveSettings& s = c.error_curve;
  ErrorCurveConfig out;
  out.levels = s.levels;
  out.path_count = s.path_count;
  out.n_ref = s.n_ref;
  out.horizon = s.horizon;
  out.x0 = s.x0;
  out.seed = c.seed;
  out.checkpoint_count = s.checkpoint_count;
  out.ref_factor = s.ref_factor;
  out.reference = ResolveReference(s.reference);
  out.offset = InitialOffset{s.offset_enabled, s.offset_epsilon};
  out.workers = c.workers;
  return out;
}

TestFunctional ToFunctional(const ExperimentConfig& c) {
  const QuadratureSettings& s = c.quadrature;
  TestFunctional func = BuiltinFunctional(s.functional, s.dimension);
  func.tau = s.tau.value_or(func.tau);
  func.tau_prime = s.tau_prime.value_or(std::min(func.tau_prime, s.horizon));
  return func;
}

QuadratureConfig ToQuadratureConfig(const ExperimentConfig& c) {
  const QuadratureSettings& s = c.quadrature;
  QuadratureConfig out;
  out.levels = s.levels;
  out.path_count = s.path_count;
  out.finest_n = s.finest_n;
  out.horizon = s.horizon;
  out.seed = c.seed;
  out.dimension = s.dimension;
  out.x0 = s.x0;
  out.workers = c.workers;
  out.include_smallest_level = c.fit.include_smallest_level;
  return out;
}

void ValidateKind(const ExperimentConfig& c, std::vector<std::string>& problems) {
  auto guard = [&](auto&& check) {
    try {
      check();
    } catch (const InvalidArgument& e) {
      problems.emplace_back(e.what());
    }
  };
  switch (c.kind) {
    case ExperimentKind::kErrorCurve:
      guard([&] {
        std::optional<DriftSpec> drift;
        guard([&] { drift = Builtin(c.error_curve.drift, c.error_curve.dimension); });
        // Unknown drift: still report the drift-independent problems.
        if (!drift) drift = Builtin("zero", std::max(c.error_curve.dimension, 1));
        for (std::string& p : ValidateErrorCurveConfig(*drift, ToErrorCurveConfig(c))) {
          problems.push_back(std::move(p));
        }
      });
      if (c.error_curve.dump_paths < 0) problems.emplace_back("dump_paths must be nonnegative");
      break;
    case ExperimentKind::kQuadratureW:
    case ExperimentKind::kQuadratureEm:
      guard([&] {
        const TestFunctional func = ToFunctional(c);
        for (std::string& p : ValidateQuadratureConfig(func, ToQuadratureConfig(c))) {
          problems.push_back(std::move(p));
        }
      });
      if (c.kind == ExperimentKind::kQuadratureEm) {
        guard([&] { Builtin(c.quadrature.drift, c.quadrature.dimension); });
      }
      break;
    case ExperimentKind::kZvonkin: {
      const ZvonkinSettings& s = c.zvonkin;
      guard([&] { Builtin(s.drift, 1); });
      if (!(s.table_step > 0.0)) problems.emplace_back("table_step must be positive");
      if (!(s.table_radius >= 2.0)) problems.emplace_back("table_radius must be at least 2");
      if (s.table_step > 0.0) {
        const double ratio = s.table_radius / s.table_step;
        if (std::abs(ratio - std::round(ratio)) > 1e-6) {
          problems.emplace_back("table_radius must be a multiple of table_step");
        }
      }
      if (!(s.tolerance_scale > 0.0)) problems.emplace_back("tolerance_scale must be positive");
      if (!(s.inverse_tolerance > 0.0)) problems.emplace_back("inverse_tolerance must be positive");
      if (s.driftless) {
        if (!(s.window > 0.0 && s.window < 2.0)) problems.emplace_back("driftless.window must lie in (0, 2)");
        if (s.driftless_paths < 2) problems.emplace_back("driftless.path_count must be at least 2");
        if (!(s.sigma_threshold > 0.0)) problems.emplace_back("driftless.sigma_threshold must be positive");
        guard([&] { StepCount(s.driftless_horizon, s.driftless_level); });
        if (!IsPowerOfTwo(s.driftless_level)) problems.emplace_back("driftless.level must be a power of two");
      }
      break;
    }
    case ExperimentKind::kPde: {
      const PdeSettings& s = c.pde;
      if (s.dimension != 1 && s.dimension != 2) {
        problems.emplace_back("pde dimension must be 1 or 2");
        break;
      }
      guard([&] { Builtin(s.drift, s.dimension); });
      guard([&] { ParseSource(s.source); });
      if (s.points < 3) problems.emplace_back("points must be at least 3");
      if (!(s.half_width > 0.0)) problems.emplace_back("half_width must be positive");
      if (!(s.horizon > 0.0 && s.horizon <= 1.0)) problems.emplace_back("horizon must lie in (0, 1]");
      if (s.time_steps < 1) problems.emplace_back("time_steps must be positive");
      if (s.max_iter < 1) problems.emplace_back("max_iter must be positive");
      if (!(s.tol > 0.0)) problems.emplace_back("tol must be positive");
      if (s.csv_slice_stride < 1 || s.csv_node_stride < 1) problems.emplace_back("csv strides must be positive");
      if (s.points >= 3 && s.half_width > 0.0 && s.horizon > 0.0 && s.time_steps >= 1) {
        const SpaceGrid space{s.dimension, s.points, s.half_width};
        // The gradient-scaling runs go down to T/4.
        const double smallest_step = 0.25 * s.horizon / static_cast<double>(s.time_steps);
        if (smallest_step < space.step() * space.step()) {
          problems.emplace_back("time step T/(4 time_steps) falls below hx^2");
        }
        if (s.half_width <= 6.0 * std::sqrt(s.horizon)) {
          problems.emplace_back("box too small for horizon: need half_width > 6 sqrt(T)");
        }
      }
      break;
    }
    case ExperimentKind::kKernelBlowup: {
      const KernelSettings& s = c.kernel;
      if (s.points < 3) problems.emplace_back("points must be at least 3");
      if (!(s.half_width > 0.0)) problems.emplace_back("half_width must be positive");
      if (s.times.size() < 3) problems.emplace_back("times needs at least 3 entries");
      if (s.points >= 3 && s.half_width > 0.0) {
        const double hx = 2.0 * s.half_width / static_cast<double>(s.points - 1);
        for (double t : s.times) {
          if (!(t >= 4.0 * hx * hx)) {
            problems.push_back("time " + std::to_string(t) + " is below 4 hx^2");
          }
        }
      }
      break;
    }
  }
}

Json FitToJson(const RateFit& fit) {
  return Json{{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"slope_std_error", fit.slope_std_error},
              {"r_squared", fit.r_squared},
              {"levels", fit.levels},
              {"abscissa", std::string(ToString(fit.abscissa))},
              {"weighted", fit.weighted}};
}

// Both abscissa variants; empty object when the ladder cannot be fitted.
Json FitLadder(const LadderView& ladder, const FitSettings& settings, Json& notes) {
  Json fits = Json::object();
  const bool positive =
      std::all_of(ladder.values.begin(), ladder.values.end(), [](double v) { return v > 0.0; });
  if (!positive) {
    notes.push_back("ladder has nonpositive values; no rate fit");
    return fits;
  }
  FitOptions options;
  options.include_smallest_level = settings.include_smallest_level;
  options.weighted = settings.weighted;
  try {
    options.abscissa = Abscissa::kLogN;
    fits["plain"] = FitToJson(FitRate(ladder, options));
    options.abscissa = Abscissa::kLogCorrected;
    fits["corrected"] = FitToJson(FitRate(ladder, options));
    options.abscissa = Abscissa::kLogN;
    const StabilityDiagnostic diagnostic = DropLargestLevelDiagnostic(ladder, options);
    fits["stability"] = Json{{"slope_without_largest", diagnostic.slope_without_largest},
                             {"threshold", diagnostic.threshold},
                             {"stable", diagnostic.stable}};
  } catch (const InvalidArgument& e) {
    notes.push_back(std::string("rate fit skipped: ") + e.what());
  }
  return fits;
}

Json Ledger(const char* stream, std::uint64_t key, std::uint64_t paths) {
  return Json{{"stream", stream}, {"philox_key", key}, {"path_counter_begin", 0},
              {"path_counter_end", paths}};
}

struct Check {
  Json entries = Json::array();
  std::vector<std::string> failed;

  void Add(const std::string& name, bool passed, double value, double tolerance) {
    entries.push_back(Json{{"name", name}, {"passed", passed}, {"value", value}, {"tolerance", tolerance}});
    if (!passed) failed.push_back(name);
  }
};

struct KindOutput {
  Json results;
  Json rate_fits = Json::object();
  Json seed_ledger = Json::array();
  std::vector<std::string> failed_checks;
};

KindOutput RunErrorCurve(const ExperimentConfig& c, bool write) {
  const ErrorCurveSettings& s = c.error_curve;
  const DriftSpec drift = Builtin(s.drift, s.dimension);
  const ErrorCurveConfig config = ToErrorCurveConfig(c);
  const ErrorCurve curve = EstimateErrorCurve(drift, config);

  KindOutput out;
  Json notes = Json::array();
  out.results = Json{{"drift", curve.drift_name},
                     {"dimension", curve.dimension},
                     {"reference", std::string(ToString(curve.reference_kind))},
                     {"exact", curve.exact()},
                     {"levels", curve.levels},
                     {"mse", curve.mse},
                     {"ci_half_width", curve.ci_half_width},
                     {"mse_time_max", curve.mse_time_max},
                     {"ci_time_max", curve.ci_time_max},
                     {"checkpoint_times", curve.checkpoint_times}};
  if (!curve.exact()) {
    out.rate_fits = FitLadder(curve.Ladder(), c.fit, notes);
    Json time_max_notes = Json::array();
    const Json time_max = FitLadder(curve.TimeMaxLadder(), c.fit, time_max_notes);
    if (time_max.contains("plain")) out.rate_fits["time_max_plain"] = time_max["plain"];
  }
  out.results["notes"] = notes;
  out.seed_ledger.push_back(Ledger("brownian_increments", c.seed, s.path_count));

  if (write) {
    CsvWriter csv(c.output_dir / "error_curve.csv");
    csv.Header({"n", "mse", "ci", "estimator_variant"});
    for (std::size_t i = 0; i < curve.levels.size(); ++i) {
      csv.Begin();
      csv.Field(curve.levels[i]);
      csv.Field(curve.mse[i]);
      csv.Field(curve.ci_half_width[i]);
      csv.Field(std::string_view("max_then_mean"));
      csv.End();
      csv.Begin();
      csv.Field(curve.levels[i]);
      csv.Field(curve.mse_time_max[i]);
      csv.Field(curve.ci_time_max[i]);
      csv.Field(std::string_view("mean_then_max"));
      csv.End();
    }
    if (s.dump_paths > 0) {
      const std::filesystem::path dir = c.output_dir / "paths";
      std::filesystem::create_directories(dir);
      const auto dumped = std::min<std::uint64_t>(static_cast<std::uint64_t>(s.dump_paths), s.path_count);
      const std::vector<double> x0 =
          s.x0.empty() ? std::vector<double>(static_cast<std::size_t>(s.dimension), 0.0) : s.x0;
      for (std::uint64_t p = 0; p < dumped; ++p) {
        const BrownianTableau tableau =
            BrownianTableau::Generate(PathSeed{c.seed, p}, s.dimension, s.n_ref, s.horizon);
        for (std::int64_t level : s.levels) {
          const SchemePath path =
              SimulateEm(drift, tableau, level, InitialStateFor(level, x0, config.offset));
          WritePathCsv(dir / ("path_" + std::to_string(p) + "_n" + std::to_string(level) + ".csv"), path);
        }
      }
    }
  }
  return out;
}

KindOutput RunQuadrature(const ExperimentConfig& c, bool write) {
  const TestFunctional func = ToFunctional(c);
  const QuadratureConfig config = ToQuadratureConfig(c);
  const bool em = c.kind == ExperimentKind::kQuadratureEm;
  const ScalingReport report =
      em ? QuadratureStatisticEm(func, Builtin(c.quadrature.drift, c.quadrature.dimension), config)
         : QuadratureStatisticBrownian(func, config);

  KindOutput out;
  Json notes = Json::array();
  out.results = Json{{"functional", report.functional_name},
                     {"drift", em ? Json(report.drift_name) : Json(nullptr)},
                     {"dimension", report.dimension},
                     {"tau", report.tau},
                     {"tau_prime", report.tau_prime},
                     {"exact", report.exact()},
                     {"levels", report.levels},
                     {"q", report.q},
                     {"ci_half_width", report.ci_half_width}};
  if (!report.exact()) out.rate_fits = FitLadder(report.Ladder(), c.fit, notes);
  out.results["notes"] = notes;
  out.seed_ledger.push_back(Ledger("brownian_increments", c.seed, c.quadrature.path_count));

  if (write) {
    CsvWriter csv(c.output_dir / "scaling.csv");
    csv.Header({"n", "q", "ci"});
    for (std::size_t i = 0; i < report.levels.size(); ++i) {
      csv.Begin();
      csv.Field(report.levels[i]);
      csv.Field(report.q[i]);
      csv.Field(report.ci_half_width[i]);
      csv.End();
    }
  }
  return out;
}

KindOutput RunZvonkin(const ExperimentConfig& c, bool write) {
  const ZvonkinSettings& s = c.zvonkin;
  const DriftSpec drift = Builtin(s.drift, 1);
  const ScaleTable table = BuildScaleTable(drift, s.z, s.table_radius, s.table_step);
  Check checks;

  // psi(phi(x)) at the nodes and at panel midpoints.
  double inverse_error = 0.0;
  const auto grid = table.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    inverse_error = std::max(inverse_error, std::abs(table.Psi(table.phi()[i]) - grid[i]));
    if (i + 1 < grid.size()) {
      const double mid = 0.5 * (grid[i] + grid[i + 1]);
      inverse_error = std::max(inverse_error, std::abs(table.Psi(table.Phi(mid)) - mid));
    }
  }
  checks.Add("psi_phi_identity", inverse_error <= s.inverse_tolerance, inverse_error, s.inverse_tolerance);

  const OdeResidualReport ode = VerifyOdeResidual(table, drift, s.tolerance_scale);
  checks.Add("ode_residual", ode.passed, ode.max_fd_residual, ode.tolerance);
  const LipschitzBoundReport lip = VerifyLipschitzBounds(table, drift);
  checks.Add("lipschitz_bounds", lip.passed,
             std::max({lip.sup_phi_prime, lip.sup_phi_second, lip.sup_psi_prime,
                       lip.sup_phi_prime_of_psi_derivative}),
             lip.bound);

  Json one_sided = Json::array();
  for (const OneSidedResidual& r : ode.one_sided) {
    one_sided.push_back(Json{{"x", r.x}, {"left", r.left}, {"right", r.right}});
  }

  KindOutput out;
  out.results = Json{{"drift", drift.name},
                     {"z", s.z},
                     {"nodes", table.size()},
                     {"strictly_increasing", table.StrictlyIncreasing()},
                     {"localisation_gap", table.LocalisationGap()},
                     {"psi_phi_max_error", inverse_error},
                     {"ode_residual",
                      Json{{"max_fd_residual", ode.max_fd_residual},
                           {"max_analytic_residual", ode.max_analytic_residual},
                           {"max_identity_gap", ode.max_identity_gap},
                           {"tolerance", ode.tolerance},
                           {"points_checked", ode.points_checked},
                           {"points_excluded", ode.points_excluded},
                           {"one_sided", one_sided}}},
                     {"lipschitz",
                      Json{{"sup_phi_prime", lip.sup_phi_prime},
                           {"sup_phi_second", lip.sup_phi_second},
                           {"sup_psi_prime", lip.sup_psi_prime},
                           {"sup_phi_prime_of_psi_derivative", lip.sup_phi_prime_of_psi_derivative},
                           {"bound", lip.bound}}}};

  if (s.driftless) {
    DriftlessnessConfig config;
    config.z = s.z;
    config.level = s.driftless_level;
    config.horizon = s.driftless_horizon;
    config.path_count = s.driftless_paths;
    config.seed = c.seed;
    config.table_step = s.table_step;
    config.table_radius = s.table_radius;
    config.window = s.window;
    config.sigma_threshold = s.sigma_threshold;
    config.workers = c.workers;
    const DriftlessnessReport report = TransformedDriftlessnessCheck(drift, config);
    out.results["driftlessness"] = Json{{"mean_increment", report.mean_increment},
                                        {"standard_error", report.standard_error},
                                        {"z_score", report.z_score},
                                        {"exited_fraction", report.exited_fraction},
                                        {"path_count", report.path_count}};
    checks.Add("driftlessness", report.passed, std::abs(report.z_score), s.sigma_threshold);
    out.seed_ledger.push_back(Ledger("brownian_increments", c.seed, s.driftless_paths));
  }
  out.results["checks"] = checks.entries;
  out.failed_checks = checks.failed;
  if (write) WriteScaleTableCsv(c.output_dir / "scale_table.csv", table);
  return out;
}

KindOutput RunPde(const ExperimentConfig& c, bool write) {
  const PdeSettings& s = c.pde;
  const DriftSpec drift = Builtin(s.drift, s.dimension);
  const Source source = ParseSource(s.source);
  const SpaceGrid space{s.dimension, s.points, s.half_width};
  DriftPdeOptions options;
  options.max_iter = s.max_iter;
  options.tol = s.tol;
  options.workers = c.workers;
  Check checks;
  KindOutput out;

  double horizon = s.horizon;
  Json horizon_json = Json{{"requested", s.horizon}, {"halvings", 0}};
  if (s.find_horizon) {
    const WorkableHorizon found =
        FindWorkableHorizon(drift, source.fn, space, s.horizon, s.time_steps, options);
    horizon = found.horizon;
    horizon_json["halvings"] = found.halvings;
  }
  horizon_json["workable"] = horizon;

  const TimeGrid time{horizon, s.time_steps};
  const DriftPdeSolution solution = DriftPdeSolve(drift, source.fn, space, time, options);
  const GridField& u = solution.field;
  const double max_norm = u.MaxNorm();
  const double holder = GradientHolderQuotient(u, 0.5);

  // Heat problem with g = 1: u(t) = t in the interior, and |u| <= T |g|.
  const GridField heat = HeatMildSolve([](double, std::span<const double>) { return 1.0; }, space,
                                       time, c.workers);
  double constant_error = 0.0;
  for (std::int64_t k = 0; k <= time.steps; ++k) {
    const auto slice = heat.Slice(k);
    for (std::int64_t flat = 0; flat < space.size(); ++flat) {
      if (heat.Interior(flat)) constant_error = std::max(constant_error, std::abs(slice[flat] - time.Time(k)));
    }
  }
  checks.Add("constant_source_u_equals_t", constant_error <= 1e-6, constant_error, 1e-6);
  const GridField heat_source = HeatMildSolve(source.fn, space, time, c.workers);
  const double heat_bound = horizon * source.sup;
  checks.Add("heat_max_norm_bound", heat_source.MaxNorm() <= heat_bound * (1.0 + 1e-12),
             heat_source.MaxNorm(), heat_bound);

  // grad u / sqrt(T) across T0/4, T0/2, T0.
  Json scaling = Json::array();
  double lowest = INFINITY, highest = 0.0;
  for (double fraction : {0.25, 0.5, 1.0}) {
    const TimeGrid sub{horizon * fraction, s.time_steps};
    const DriftPdeSolution run = DriftPdeSolve(drift, source.fn, space, sub, options);
    const double ratio = run.field.MaxGradient() / std::sqrt(sub.horizon);
    const double holder_ratio = GradientHolderQuotient(run.field, 0.5) / std::pow(sub.horizon, 0.25);
    lowest = std::min(lowest, ratio);
    highest = std::max(highest, ratio);
    scaling.push_back(Json{{"horizon", sub.horizon},
                           {"max_gradient", run.field.MaxGradient()},
                           {"gradient_over_sqrt_t", ratio},
                           {"holder_over_t_quarter", holder_ratio}});
  }
  const double spread = lowest > 0.0 ? highest / lowest : INFINITY;
  checks.Add("gradient_sqrt_t_scaling", spread <= 2.0, spread, 2.0);

  // Backward problem against the forward one with time reversed.
  const DriftPdeSolution backward = BackwardDriftPdeSolve(drift, source.fn, space, time, options);
  double reversal_gap = 0.0;
  for (std::int64_t k = 0; k <= time.steps; ++k) {
    const auto forward_slice = u.Slice(time.steps - k);
    const auto backward_slice = backward.field.Slice(k);
    for (std::size_t i = 0; i < forward_slice.size(); ++i) {
      reversal_gap = std::max(reversal_gap, std::abs(forward_slice[i] - backward_slice[i]));
    }
  }
  const double reversal_tolerance = 10.0 * s.tol;
  checks.Add("time_reversal", reversal_gap <= reversal_tolerance, reversal_gap, reversal_tolerance);

  out.results = Json{{"drift", drift.name},
                     {"source", s.source},
                     {"horizon", horizon_json},
                     {"iterations", solution.iterations},
                     {"contraction_factor", solution.contraction_factor},
                     {"final_gap", solution.final_gap},
                     {"interior_half_width", u.interior_half_width()},
                     {"max_norm", max_norm},
                     {"max_gradient", u.MaxGradient()},
                     {"max_hessian", u.MaxHessian()},
                     {"gradient_holder_half", holder},
                     {"constant_source_max_error", constant_error},
                     {"heat_max_norm", heat_source.MaxNorm()},
                     {"heat_bound", heat_bound},
                     {"gradient_scaling", scaling},
                     {"time_reversal_gap", reversal_gap},
                     {"checks", checks.entries}};
  out.failed_checks = checks.failed;
  if (write) {
    WriteGridFieldCsv(c.output_dir / "grid_field.csv", u, s.csv_slice_stride, s.csv_node_stride);
  }
  return out;
}

KindOutput RunKernel(const ExperimentConfig& c, bool write) {
  const KernelSettings& s = c.kernel;
  const double hx = 2.0 * s.half_width / static_cast<double>(s.points - 1);
  const KernelBlowupReport report = VerifyKernelBlowup(hx, s.half_width, s.times);
  Check checks;
  for (int k = 0; k < 3; ++k) {
    checks.Add("slope_k" + std::to_string(k), std::abs(report.slopes[k] + 0.5 * k) <= report.tolerance,
               report.slopes[k], report.tolerance);
  }
  Json rows = Json::array();
  for (const KernelNormRow& row : report.rows) {
    rows.push_back(Json{{"k", row.order},
                        {"t", row.time},
                        {"l1_norm", row.l1_norm},
                        {"closed_form", row.closed_form},
                        {"mass_outside_box", row.truncated_mass}});
  }
  KindOutput out;
  out.results = Json{{"hx", hx},
                     {"slopes", Json::array({report.slopes[0], report.slopes[1], report.slopes[2]})},
                     {"norms", rows},
                     {"checks", checks.entries}};
  out.failed_checks = checks.failed;
  if (write) WriteKernelNormsCsv(c.output_dir / "kernel_norms.csv", report);
  return out;
}

void CollectDiff(const Json& a, const Json& b, const std::string& pointer, std::vector<std::string>& out) {
  const std::string where = pointer.empty() ? "/" : pointer;
  if (a.is_object() && b.is_object()) {
    for (const auto& item : a.items()) {
      const std::string child = pointer + "/" + item.key();
      if (!b.contains(item.key())) {
        out.push_back(child);
      } else {
        CollectDiff(item.value(), b.at(item.key()), child, out);
      }
    }
    for (const auto& item : b.items()) {
      if (!a.contains(item.key())) out.push_back(pointer + "/" + item.key());
    }
    return;
  }
  if (a.is_array() && b.is_array()) {
    const std::size_t common = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < common; ++i) CollectDiff(a[i], b[i], pointer + "/" + std::to_string(i), out);
    for (std::size_t i = common; i < std::max(a.size(), b.size()); ++i) {
      out.push_back(pointer + "/" + std::to_string(i));
    }
    return;
  }
  if (a != b) out.push_back(where);
}

}  // namespace

std::string_view ToString(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::kErrorCurve: return "error_curve";
    case ExperimentKind::kQuadratureW: return "quadrature_w";
    case ExperimentKind::kQuadratureEm: return "quadrature_em";
    case ExperimentKind::kZvonkin: return "zvonkin";
    case ExperimentKind::kPde: return "pde";
    case ExperimentKind::kKernelBlowup: return "kernel_blowup";
  }
  return "unknown";
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument(JoinProblems(problems)), problems_(std::move(problems)) {}

ExperimentConfig ParseConfig(const Json& document) {
  std::vector<std::string> problems;
  ExperimentConfig c;
  Reader top(document, "", problems);
  std::string kind_text;
  top.Get("kind", kind_text);
  bool kind_known = false;
  if (!document.is_object() || !document.contains("kind")) {
    problems.emplace_back("missing key kind");
  } else if (const auto kind = ParseKind(kind_text)) {
    c.kind = *kind;
    kind_known = true;
  } else if (!kind_text.empty()) {
    problems.push_back("unknown experiment kind '" + kind_text + "'");
  }
  top.Get("seed", c.seed);
  top.Get("workers", c.workers);
  std::string output_dir = c.output_dir.string();
  top.Get("output_dir", output_dir);
  c.output_dir = output_dir;
  if (c.workers < 1) problems.emplace_back("workers must be at least 1");

  auto read_fit = [&] {
    if (const Json* fit = top.Sub("fit")) {
      Reader r(*fit, "fit", problems);
      r.Get("include_smallest_level", c.fit.include_smallest_level);
      r.Get("weighted", c.fit.weighted);
      r.Finish();
    }
  };

  switch (c.kind) {
    case ExperimentKind::kErrorCurve: {
      ErrorCurveSettings& s = c.error_curve;
      top.Get("drift", s.drift);
      top.Get("dimension", s.dimension);
      top.Get("horizon", s.horizon);
      top.Get("levels", s.levels);
      top.Get("path_count", s.path_count);
      top.Get("n_ref", s.n_ref);
      top.Get("checkpoint_count", s.checkpoint_count);
      top.Get("ref_factor", s.ref_factor);
      top.Get("reference", s.reference);
      top.Get("x0", s.x0);
      top.Get("dump_paths", s.dump_paths);
      if (const Json* offset = top.Sub("initial_offset")) {
        Reader r(*offset, "initial_offset", problems);
        r.Get("enabled", s.offset_enabled);
        r.Get("epsilon", s.offset_epsilon);
        r.Finish();
      }
      read_fit();
      if (s.reference != "default") {
        try {
          ParseReferenceKind(s.reference);
        } catch (const InvalidArgument& e) {
          problems.emplace_back(e.what());
        }
      }
      break;
    }
    case ExperimentKind::kQuadratureW:
    case ExperimentKind::kQuadratureEm: {
      QuadratureSettings& s = c.quadrature;
      top.Get("functional", s.functional);
      if (c.kind == ExperimentKind::kQuadratureEm) top.Get("drift", s.drift);
      top.Get("dimension", s.dimension);
      top.Get("horizon", s.horizon);
      top.Get("levels", s.levels);
      top.Get("path_count", s.path_count);
      top.Get("finest_n", s.finest_n);
      top.Get("tau", s.tau);
      top.Get("tau_prime", s.tau_prime);
      top.Get("x0", s.x0);
      read_fit();
      break;
    }
    case ExperimentKind::kZvonkin: {
      ZvonkinSettings& s = c.zvonkin;
      top.Get("drift", s.drift);
      top.Get("z", s.z);
      top.Get("table_step", s.table_step);
      top.Get("table_radius", s.table_radius);
      top.Get("tolerance_scale", s.tolerance_scale);
      top.Get("inverse_tolerance", s.inverse_tolerance);
      if (const Json* d = top.Sub("driftless")) {
        Reader r(*d, "driftless", problems);
        r.Get("enabled", s.driftless);
        r.Get("level", s.driftless_level);
        r.Get("horizon", s.driftless_horizon);
        r.Get("path_count", s.driftless_paths);
        r.Get("window", s.window);
        r.Get("sigma_threshold", s.sigma_threshold);
        r.Finish();
      }
      break;
    }
    case ExperimentKind::kPde: {
      PdeSettings& s = c.pde;
      top.Get("drift", s.drift);
      top.Get("source", s.source);
      top.Get("dimension", s.dimension);
      top.Get("points", s.points);
      top.Get("half_width", s.half_width);
      top.Get("horizon", s.horizon);
      top.Get("time_steps", s.time_steps);
      top.Get("max_iter", s.max_iter);
      top.Get("tol", s.tol);
      top.Get("find_horizon", s.find_horizon);
      top.Get("csv_slice_stride", s.csv_slice_stride);
      top.Get("csv_node_stride", s.csv_node_stride);
      break;
    }
    case ExperimentKind::kKernelBlowup: {
      KernelSettings& s = c.kernel;
      top.Get("points", s.points);
      top.Get("half_width", s.half_width);
      top.Get("times", s.times);
      break;
    }
  }
  top.Finish();
  if (kind_known) ValidateKind(c, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError({"cannot open config file " + file.string()});
  Json document;
  try {
    document = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON in ") + file.string() + ": " + e.what()});
  }
  return ParseConfig(document);
}

Json EchoConfig(const ExperimentConfig& c) {
  Json echo{{"kind", std::string(ToString(c.kind))}, {"seed", c.seed}};
  const Json fit{{"include_smallest_level", c.fit.include_smallest_level}, {"weighted", c.fit.weighted}};
  switch (c.kind) {
    case ExperimentKind::kErrorCurve: {
      const ErrorCurveSettings& s = c.error_curve;
      echo["drift"] = s.drift;
      echo["dimension"] = s.dimension;
      echo["horizon"] = s.horizon;
      echo["levels"] = s.levels;
      echo["path_count"] = s.path_count;
      echo["n_ref"] = s.n_ref;
      echo["checkpoint_count"] = s.checkpoint_count;
      echo["ref_factor"] = s.ref_factor;
      echo["reference"] = s.reference;
      echo["x0"] = s.x0.empty() ? std::vector<double>(static_cast<std::size_t>(std::max(s.dimension, 0)), 0.0) : s.x0;
      echo["initial_offset"] = Json{{"enabled", s.offset_enabled}, {"epsilon", s.offset_epsilon}};
      echo["dump_paths"] = s.dump_paths;
      echo["fit"] = fit;
      break;
    }
    case ExperimentKind::kQuadratureW:
    case ExperimentKind::kQuadratureEm: {
      const QuadratureSettings& s = c.quadrature;
      const TestFunctional func = ToFunctional(c);
      echo["functional"] = s.functional;
      if (c.kind == ExperimentKind::kQuadratureEm) echo["drift"] = s.drift;
      echo["dimension"] = s.dimension;
      echo["horizon"] = s.horizon;
      echo["levels"] = s.levels;
      echo["path_count"] = s.path_count;
      echo["finest_n"] = s.finest_n;
      echo["tau"] = func.tau;
      echo["tau_prime"] = func.tau_prime;
      if (c.kind == ExperimentKind::kQuadratureEm) {
        echo["x0"] = s.x0.empty() ? std::vector<double>(static_cast<std::size_t>(std::max(s.dimension, 0)), 0.0) : s.x0;
      }
      echo["fit"] = fit;
      break;
    }
    case ExperimentKind::kZvonkin: {
      const ZvonkinSettings& s = c.zvonkin;
      echo["drift"] = s.drift;
      echo["z"] = s.z;
      echo["table_step"] = s.table_step;
      echo["table_radius"] = s.table_radius;
      echo["tolerance_scale"] = s.tolerance_scale;
      echo["inverse_tolerance"] = s.inverse_tolerance;
      echo["driftless"] = Json{{"enabled", s.driftless},
                               {"level", s.driftless_level},
                               {"horizon", s.driftless_horizon},
                               {"path_count", s.driftless_paths},
                               {"window", s.window},
                               {"sigma_threshold", s.sigma_threshold}};
      break;
    }
    case ExperimentKind::kPde: {
      const PdeSettings& s = c.pde;
      echo["drift"] = s.drift;
      echo["source"] = s.source;
      echo["dimension"] = s.dimension;
      echo["points"] = s.points;
      echo["half_width"] = s.half_width;
      echo["horizon"] = s.horizon;
      echo["time_steps"] = s.time_steps;
      echo["max_iter"] = s.max_iter;
      echo["tol"] = s.tol;
      echo["find_horizon"] = s.find_horizon;
      echo["csv_slice_stride"] = s.csv_slice_stride;
      echo["csv_node_stride"] = s.csv_node_stride;
      break;
    }
    case ExperimentKind::kKernelBlowup: {
      const KernelSettings& s = c.kernel;
      echo["points"] = s.points;
      echo["half_width"] = s.half_width;
      echo["times"] = s.times;
      break;
    }
  }
  return echo;
}

RunOutcome Run(const ExperimentConfig& config, bool write_outputs) {
  const auto start = std::chrono::steady_clock::now();
  if (write_outputs) std::filesystem::create_directories(config.output_dir);

  KindOutput output;
  switch (config.kind) {
    case ExperimentKind::kErrorCurve: output = RunErrorCurve(config, write_outputs); break;
    case ExperimentKind::kQuadratureW:
    case ExperimentKind::kQuadratureEm: output = RunQuadrature(config, write_outputs); break;
    case ExperimentKind::kZvonkin: output = RunZvonkin(config, write_outputs); break;
    case ExperimentKind::kPde: output = RunPde(config, write_outputs); break;
    case ExperimentKind::kKernelBlowup: output = RunKernel(config, write_outputs); break;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  RunOutcome outcome;
  outcome.document = Json{{"schema_version", kSchemaVersion},
                          {"version", kVersion},
                          {"kind", std::string(ToString(config.kind))},
                          {"config", EchoConfig(config)},
                          {"results", std::move(output.results)},
                          {"rate_fits", std::move(output.rate_fits)},
                          {"seed_ledger", std::move(output.seed_ledger)},
                          {"wall_clock_seconds", elapsed.count()}};
  outcome.failed_checks = std::move(output.failed_checks);
  if (write_outputs) {
    std::ofstream out(config.output_dir / "results.json");
    out << outcome.document.dump(2) << '\n';
    if (!out) throw InvalidArgument("cannot write " + (config.output_dir / "results.json").string());
  }
  return outcome;
}

std::vector<std::string> DiffJson(const Json& a, const Json& b, const std::string& prefix) {
  std::vector<std::string> out;
  CollectDiff(a, b, prefix, out);
  return out;
}

ReproduceVerdict Reproduce(const Json& recorded, int workers) {
  ReproduceVerdict verdict;
  if (!recorded.is_object() || !recorded.contains("config") || !recorded.contains("version")) {
    throw ConfigError({"not a results document: missing config or version"});
  }
  verdict.recorded_version = recorded.at("version").is_string() ? recorded.at("version").get<std::string>() : "";
  if (verdict.recorded_version != kVersion) {
    verdict.version_mismatch = true;
    return verdict;
  }
  ExperimentConfig config = ParseConfig(recorded.at("config"));
  config.workers = workers;
  const RunOutcome fresh = Run(config, false);
  // Round-trip through text so both sides went through the same serialiser.
  const Json again = Json::parse(fresh.document.dump());
  for (const char* section : {"schema_version", "config", "results", "rate_fits", "seed_ledger"}) {
    const std::string pointer = std::string("/") + section;
    if (!recorded.contains(section)) {
      verdict.mismatches.push_back(pointer);
      continue;
    }
    for (std::string& m : DiffJson(recorded.at(section), again.at(section), pointer)) {
      verdict.mismatches.push_back(std::move(m));
    }
  }
  verdict.identical = verdict.mismatches.empty();
  return verdict;
}

}  // namespace emlab
