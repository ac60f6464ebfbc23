#include "emlab/quadrature_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emlab/em_engine.hpp"
#include "emlab/error.hpp"
#include "emlab/parallel.hpp"
#include "emlab/rng_paths.hpp"
#include "emlab/streaming_stats.hpp"

namespace emlab {
namespace {

// |x| beyond this is treated as unreachable by a Brownian path on [0, 1]
// (P(sup|W| > 10) < 1e-22); the coordinate functional is clamped there.
constexpr double kCoordinateTruncation = 10.0;

double SignOf(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::optional<double> ParseArgument(std::string_view identifier, std::string& base) {
  const auto open = identifier.find('(');
  if (open == std::string_view::npos) {
    base = std::string(identifier);
    return std::nullopt;
  }
  if (identifier.back() != ')') {
    throw InvalidArgument("malformed functional identifier '" + std::string(identifier) + "'");
  }
  base = std::string(identifier.substr(0, open));
  const std::string arg(identifier.substr(open + 1, identifier.size() - open - 2));
  try {
    std::size_t used = 0;
    const double value = std::stod(arg, &used);
    if (used != arg.size()) throw std::invalid_argument(arg);
    return value;
  } catch (const std::exception&) {
    throw InvalidArgument("bad numeric argument in functional identifier '" +
                          std::string(identifier) + "'");
  }
}

struct LevelAccumulator {
  std::vector<RunningMoments> per_level;
  void Merge(const LevelAccumulator& other) {
    for (std::size_t i = 0; i < per_level.size(); ++i) per_level[i].Merge(other.per_level[i]);
  }
};

void CheckCrudeBound(const TestFunctional& func, double integral) {
  const double bound = 2.0 * func.sup_bound * (func.tau_prime - func.tau);
  // Summation roundoff can exceed the bound only by a few ulps.
  if (std::abs(integral) > bound * (1.0 + 1e-12)) {
    throw NumericalFailure("quadrature integral " + std::to_string(integral) +
                           " exceeds the boundedness bound " + std::to_string(bound));
  }
}

ScalingReport Finish(const TestFunctional& func, const QuadratureConfig& config,
                     const LevelAccumulator& total) {
  ScalingReport report;
  report.functional_name = func.name;
  report.dimension = config.dimension;
  report.levels = config.levels;
  report.finest_n = config.finest_n;
  report.path_count = config.path_count;
  report.horizon = config.horizon;
  report.tau = func.tau;
  report.tau_prime = func.tau_prime;
  for (const auto& m : total.per_level) {
    report.q.push_back(m.mean());
    report.ci_half_width.push_back(m.ci95_half_width());
  }
  const bool all_positive =
      std::all_of(report.q.begin(), report.q.end(), [](double v) { return v > 0.0; });
  const std::size_t fit_points = report.levels.size() - (config.include_smallest_level ? 0 : 1);
  if (all_positive && fit_points >= 3) {
    FitOptions options;
    options.include_smallest_level = config.include_smallest_level;
    report.plain_fit = FitRate(report.Ladder(), options);
    options.abscissa = Abscissa::kLogCorrected;
    report.corrected_fit = FitRate(report.Ladder(), options);
  }
  return report;
}

void ThrowIfInvalid(const TestFunctional& func, const QuadratureConfig& config) {
  const auto errors = ValidateQuadratureConfig(func, config);
  if (errors.empty()) return;
  std::string message = "invalid quadrature configuration:";
  for (const auto& e : errors) message += "\n  - " + e;
  throw InvalidArgument(message);
}

}  // namespace

bool ScalingReport::exact() const noexcept {
  return std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; });
}

TestFunctional BuiltinFunctional(std::string_view identifier, int dimension) {
  if (dimension < 1) throw InvalidArgument("functional dimension must be positive");
  std::string base;
  const auto argument = ParseArgument(identifier, base);
  TestFunctional func;
  if (base == "constant") {
    const double c = argument.value_or(1.0);
    func.name = "constant(" + std::to_string(c) + ")";
    func.sup_bound = std::abs(c);
    func.f = [c](double, std::span<const double>, std::span<const double>) { return c; };
  } else if (base == "coordinate") {
    func.name = "coordinate";
    func.sup_bound = kCoordinateTruncation;
    func.f = [](double, std::span<const double> x, std::span<const double>) {
      return std::clamp(x[0], -kCoordinateTruncation, kCoordinateTruncation);
    };
  } else if (base == "sign_sin") {
    func.name = "sign_sin";
    func.sup_bound = 1.0;
    func.f = [](double, std::span<const double> x, std::span<const double>) {
      return SignOf(std::sin(std::numbers::pi * x[0]));
    };
  } else if (base == "indicator") {
    const double a = argument.value_or(0.0);
    func.name = "indicator(" + std::to_string(a) + ")";
    func.sup_bound = 1.0;
    func.f = [a](double, std::span<const double> x, std::span<const double>) {
      return x[0] > a ? 1.0 : 0.0;
    };
  } else if (base == "sign_sin_frozen") {
    func.name = "sign_sin_frozen";
    func.sup_bound = 1.0;
    func.f = [](double, std::span<const double> x, std::span<const double> y) {
      return SignOf(std::sin(std::numbers::pi * (x[0] - y[0])));
    };
    func.frozen = [](std::span<const double> state) {
      return std::vector<double>{state[0]};
    };
  } else if (base == "cos_time_sign_sin") {
    func.name = "cos_time_sign_sin";
    func.sup_bound = 1.0;
    func.autonomous = false;
    func.f = [](double s, std::span<const double> x, std::span<const double>) {
      return std::cos(std::numbers::pi * s) * SignOf(std::sin(std::numbers::pi * x[0]));
    };
  } else {
    throw InvalidArgument("unknown functional '" + std::string(identifier) + "'");
  }
  if (argument && base != "constant" && base != "indicator") {
    throw InvalidArgument("functional '" + base + "' takes no argument");
  }
  return func;
}

std::vector<FunctionalInfo> ListFunctionals() {
  return {
      {"constant(c)", "f(s,x) = c"},
      {"coordinate", "f(s,x) = clamp(x_1, -10, 10)"},
      {"sign_sin", "f(s,x) = sign(sin(pi x_1))"},
      {"indicator(a)", "f(s,x) = 1{x_1 > a}"},
      {"sign_sin_frozen", "f(s,x,Y) = sign(sin(pi (x_1 - Y))), Y = Z_tau"},
      {"cos_time_sign_sin", "f(s,x) = cos(pi s) sign(sin(pi x_1))"},
  };
}

std::vector<std::string> ValidateQuadratureConfig(const TestFunctional& func,
                                                  const QuadratureConfig& config) {
  std::vector<std::string> errors;
  if (!IsPowerOfTwo(config.finest_n)) {
    errors.push_back("finest_n must be a power of two, got " + std::to_string(config.finest_n));
  }
  if (config.levels.empty()) errors.push_back("levels must not be empty");
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    const std::int64_t n = config.levels[i];
    if (n < 1 || (config.finest_n > 0 && config.finest_n % n != 0)) {
      errors.push_back("level " + std::to_string(n) + " does not divide finest_n " +
                       std::to_string(config.finest_n));
    }
    if (i > 0 && n <= config.levels[i - 1]) errors.push_back("levels must be strictly increasing");
  }
  if (config.path_count < 2) errors.push_back("need at least two paths");
  if (!(config.horizon > 0.0)) errors.push_back("horizon must be positive");
  if (!(0.0 <= func.tau && func.tau <= func.tau_prime && func.tau_prime <= config.horizon)) {
    errors.push_back("need 0 <= tau <= tau' <= T");
  }
  for (double t : {func.tau, func.tau_prime}) {
    const double scaled = t / config.horizon * static_cast<double>(config.finest_n);
    if (std::abs(scaled - std::round(scaled)) > 1e-9) {
      errors.push_back("tau/tau' must lie on the finest grid");
    }
  }
  if (!(func.sup_bound >= 0.0)) errors.push_back("sup_bound must be nonnegative");
  if (config.dimension < 1) errors.push_back("dimension must be positive");
  if (!config.x0.empty() && config.x0.size() != static_cast<std::size_t>(config.dimension)) {
    errors.push_back("x0 dimension does not match");
  }
  return errors;
}

double QuadratureIntegral(const TestFunctional& func, std::int64_t level, std::int64_t finest_n,
                          double horizon,
                          const std::function<std::span<const double>(std::int64_t)>& state,
                          std::span<const double> frozen) {
  const std::int64_t stride = finest_n / level;
  const double h = horizon / static_cast<double>(finest_n);
  const std::int64_t first = std::llround(func.tau / h);
  const std::int64_t last = std::llround(func.tau_prime / h);
  auto checked = [&](double value) {
    if (!(std::abs(value) <= func.sup_bound)) {
      throw InvalidArgument("functional '" + func.name + "' value " + std::to_string(value) +
                            " exceeds its declared sup_bound " + std::to_string(func.sup_bound));
    }
    return value;
  };
  double sum = 0.0;
  for (std::int64_t j = first; j < last; ++j) {
    const double s = static_cast<double>(j) * h;
    const std::int64_t base = (j / stride) * stride;
    // Separate statements: state() may reuse one buffer.
    const double at_s = checked(func.f(s, state(j), frozen));
    const double at_grid = checked(func.f(s, state(base), frozen));
    sum += at_s - at_grid;
  }
  return h * sum;
}

ScalingReport QuadratureStatisticBrownian(const TestFunctional& func,
                                          const QuadratureConfig& config) {
  ThrowIfInvalid(func, config);
  const std::size_t level_count = config.levels.size();
  const double h = config.horizon / static_cast<double>(config.finest_n);
  const std::int64_t first = std::llround(func.tau / h);
  const std::int64_t last = std::llround(func.tau_prime / h);

  LevelAccumulator identity;
  identity.per_level.resize(level_count);

  auto work = [&](std::uint64_t p, LevelAccumulator& acc) {
    const BrownianTableau tableau = BrownianTableau::Generate(
        PathSeed{config.seed, p}, config.dimension, config.finest_n, config.horizon);
    std::vector<double> frozen;
    if (func.frozen) frozen = func.frozen(tableau.ValueAtIndex(first));
    auto state = [&](std::int64_t j) { return tableau.ValueAtIndex(j); };

    if (!func.autonomous) {
      for (std::size_t l = 0; l < level_count; ++l) {
        const double integral =
            QuadratureIntegral(func, config.levels[l], config.finest_n, config.horizon, state, frozen);
        CheckCrudeBound(func, integral);
        acc.per_level[l].Add(integral * integral);
      }
      return;
    }
    // Autonomous f: one evaluation per fine point serves every level.
    std::vector<double> values(static_cast<std::size_t>(std::max<std::int64_t>(last, 1)));
    for (std::int64_t j = 0; j < last; ++j) {
      const double v = func.f(static_cast<double>(j) * h, state(j), frozen);
      if (!(std::abs(v) <= func.sup_bound)) {
        throw InvalidArgument("functional '" + func.name + "' value " + std::to_string(v) +
                              " exceeds its declared sup_bound " + std::to_string(func.sup_bound));
      }
      values[j] = v;
    }
    for (std::size_t l = 0; l < level_count; ++l) {
      const std::int64_t stride = config.finest_n / config.levels[l];
      double sum = 0.0;
      for (std::int64_t j = first; j < last; ++j) sum += values[j] - values[(j / stride) * stride];
      const double integral = h * sum;
      CheckCrudeBound(func, integral);
      acc.per_level[l].Add(integral * integral);
    }
  };

  const LevelAccumulator total = ReducePaths(
      config.path_count, config.workers, identity, work,
      [](LevelAccumulator& a, const LevelAccumulator& b) { a.Merge(b); });
  return Finish(func, config, total);
}

ScalingReport QuadratureStatisticEm(const TestFunctional& func, const DriftSpec& drift,
                                    const QuadratureConfig& config) {
  ThrowIfInvalid(func, config);
  if (drift.dimension != config.dimension) {
    throw InvalidArgument("drift dimension does not match the configuration");
  }
  const std::size_t level_count = config.levels.size();
  const std::vector<double> x0 =
      config.x0.empty() ? std::vector<double>(static_cast<std::size_t>(config.dimension), 0.0)
                        : config.x0;
  const double h = config.horizon / static_cast<double>(config.finest_n);
  const std::int64_t first = std::llround(func.tau / h);
  const std::int64_t last = std::llround(func.tau_prime / h);

  LevelAccumulator identity;
  identity.per_level.resize(level_count);

  auto work = [&](std::uint64_t p, LevelAccumulator& acc) {
    const BrownianTableau tableau = BrownianTableau::Generate(
        PathSeed{config.seed, p}, config.dimension, config.finest_n, config.horizon);
    std::vector<double> scratch(static_cast<std::size_t>(config.dimension));
    std::vector<double> values(static_cast<std::size_t>(std::max<std::int64_t>(last, 1)));
    for (std::size_t l = 0; l < level_count; ++l) {
      const SchemePath path = SimulateEm(drift, tableau, config.levels[l], x0);
      auto state = [&](std::int64_t j) -> std::span<const double> {
        path.ValueAtFine(j, tableau, scratch);
        return scratch;
      };
      std::vector<double> frozen;
      if (func.frozen) {
        std::vector<double> at_tau(scratch.size());
        path.ValueAtFine(first, tableau, at_tau);
        frozen = func.frozen(at_tau);
      }
      double integral = 0.0;
      if (func.autonomous) {
        // One evaluation per fine point; grid-point values are reused.
        const std::int64_t stride = config.finest_n / config.levels[l];
        for (std::int64_t j = 0; j < last; ++j) {
          const double v = func.f(static_cast<double>(j) * h, state(j), frozen);
          if (!(std::abs(v) <= func.sup_bound)) {
            throw InvalidArgument("functional '" + func.name + "' value " + std::to_string(v) +
                                  " exceeds its declared sup_bound " + std::to_string(func.sup_bound));
          }
          values[j] = v;
        }
        double sum = 0.0;
        for (std::int64_t j = first; j < last; ++j) sum += values[j] - values[(j / stride) * stride];
        integral = h * sum;
      } else {
        integral = QuadratureIntegral(func, config.levels[l], config.finest_n, config.horizon,
                                      state, frozen);
      }
      CheckCrudeBound(func, integral);
      acc.per_level[l].Add(integral * integral);
    }
  };

  const LevelAccumulator total = ReducePaths(
      config.path_count, config.workers, identity, work,
      [](LevelAccumulator& a, const LevelAccumulator& b) { a.Merge(b); });
  ScalingReport report = Finish(func, config, total);
  report.drift_name = drift.name;
  return report;
}

}  // namespace emlab
