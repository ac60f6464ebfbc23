#include "emlab/coupled_error.hpp"

#include <algorithm>
#include <cmath>

#include "emlab/error.hpp"
#include "emlab/parallel.hpp"
#include "emlab/streaming_stats.hpp"

namespace emlab {
namespace {

struct CurveAccumulator {
  std::vector<RunningMoments> path_max;     // per level
  std::vector<RunningMoments> per_time;     // level x checkpoint

  void Merge(const CurveAccumulator& other) {
    for (std::size_t i = 0; i < path_max.size(); ++i) path_max[i].Merge(other.path_max[i]);
    for (std::size_t i = 0; i < per_time.size(); ++i) per_time[i].Merge(other.per_time[i]);
  }
};

}  // namespace

bool ErrorCurve::exact() const noexcept {
  return std::all_of(mse.begin(), mse.end(), [](double v) { return v == 0.0; }) &&
         std::all_of(mse_time_max.begin(), mse_time_max.end(), [](double v) { return v == 0.0; });
}

std::vector<double> InitialStateFor(std::int64_t level, std::span<const double> x0,
                                    const InitialOffset& offset) {
  std::vector<double> out(x0.begin(), x0.end());
  if (!offset.enabled) return out;
  const double size = std::pow(static_cast<double>(level), 0.5 * (-1.0 + offset.epsilon));
  const double per_coordinate = size / std::sqrt(static_cast<double>(out.size()));
  for (double& v : out) v += per_coordinate;
  return out;
}

std::vector<std::string> ValidateErrorCurveConfig(const DriftSpec& drift,
                                                  const ErrorCurveConfig& config) {
  std::vector<std::string> errors;
  const int d = drift.dimension;
  if (drift.regularity == Regularity::kBoundedMeasurable && d != 1) {
    errors.push_back("bounded measurable drift '" + drift.name +
                     "' is only admissible in dimension 1 (got d = " + std::to_string(d) + ")");
  }
  if (config.path_count < 100) {
    errors.push_back("path count must be at least 100, got " + std::to_string(config.path_count));
  }
  if (!IsPowerOfTwo(config.n_ref)) {
    errors.push_back("n_ref must be a power of two, got " + std::to_string(config.n_ref));
  }
  if (config.levels.empty()) errors.push_back("levels must not be empty");
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    const std::int64_t n = config.levels[i];
    if (n < 1 || (config.n_ref > 0 && config.n_ref % n != 0)) {
      errors.push_back("level " + std::to_string(n) + " does not divide n_ref " +
                       std::to_string(config.n_ref));
    }
    if (i > 0 && n <= config.levels[i - 1]) {
      errors.push_back("levels must be strictly increasing");
    }
    const double steps = config.horizon * static_cast<double>(n);
    const auto intervals = config.checkpoint_count - 1;
    if (intervals >= 1 && (std::abs(steps - std::round(steps)) > 1e-9 ||
                           static_cast<std::int64_t>(std::round(steps)) % intervals != 0)) {
      errors.push_back("level " + std::to_string(n) + " grid does not contain all " +
                       std::to_string(config.checkpoint_count) + " checkpoints");
    }
  }
  if (config.checkpoint_count < 2) errors.push_back("need at least two checkpoints");
  if (!(config.horizon > 0.0)) errors.push_back("horizon T must be positive");
  if (!config.x0.empty() && config.x0.size() != static_cast<std::size_t>(d)) {
    errors.push_back("x0 has dimension " + std::to_string(config.x0.size()) + ", drift has " +
                     std::to_string(d));
  }
  const ReferenceKind kind = config.reference.value_or(DefaultReferenceKind(drift));
  if (kind == ReferenceKind::kFineEm && !config.levels.empty() &&
      config.n_ref < config.ref_factor * config.levels.back()) {
    errors.push_back("n_ref " + std::to_string(config.n_ref) + " is below ref_factor " +
                     std::to_string(config.ref_factor) + " x largest level " +
                     std::to_string(config.levels.back()));
  }
  if (kind == ReferenceKind::kExactConstantDrift && !drift.constant_value) {
    errors.push_back("exact_constant_drift reference requires a constant drift");
  }
  if (kind == ReferenceKind::kExactZeroDrift &&
      DefaultReferenceKind(drift) != ReferenceKind::kExactZeroDrift) {
    errors.push_back("exact_zero_drift reference requires the zero drift");
  }
  if (config.offset.enabled && !(config.offset.epsilon > 0.0 && config.offset.epsilon < 1.0)) {
    errors.push_back("initial offset epsilon must lie in (0,1)");
  }
  return errors;
}

ErrorCurve EstimateErrorCurve(const DriftSpec& drift, const ErrorCurveConfig& config) {
  const auto errors = ValidateErrorCurveConfig(drift, config);
  if (!errors.empty()) {
    std::string message = "invalid error-curve configuration:";
    for (const auto& e : errors) message += "\n  - " + e;
    throw InvalidArgument(message);
  }
  const int d = drift.dimension;
  const std::vector<double> x0 =
      config.x0.empty() ? std::vector<double>(static_cast<std::size_t>(d), 0.0) : config.x0;
  const std::size_t level_count = config.levels.size();
  const std::int64_t total_fine = StepCount(config.horizon, config.n_ref);
  const std::vector<std::int64_t> checkpoints =
      EquispacedCheckpoints(total_fine, config.checkpoint_count);
  const std::size_t cp_count = checkpoints.size();

  ReferenceRequest request;
  request.kind = config.reference.value_or(DefaultReferenceKind(drift));
  request.n_ref = config.n_ref;
  request.max_tested_level = config.levels.back();
  request.ref_factor = config.ref_factor;

  std::vector<std::vector<double>> initial_states;
  for (std::int64_t n : config.levels) {
    initial_states.push_back(InitialStateFor(n, x0, config.offset));
  }

  CurveAccumulator identity;
  identity.path_max.resize(level_count);
  identity.per_time.resize(level_count * cp_count);

  auto work = [&](std::uint64_t p, CurveAccumulator& acc) {
    const BrownianTableau tableau =
        BrownianTableau::Generate(PathSeed{config.seed, p}, d, config.n_ref, config.horizon);
    const ReferencePath ref = SimulateReference(drift, tableau, request, x0, checkpoints);
    for (std::size_t l = 0; l < level_count; ++l) {
      const SchemePath path = SimulateEm(drift, tableau, config.levels[l], initial_states[l]);
      double worst = 0.0;
      for (std::size_t c = 0; c < cp_count; ++c) {
        const auto x = path.State(checkpoints[c] / path.stride());
        const auto y = ref.State(c);
        double sq = 0.0;
        for (int i = 0; i < d; ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
        worst = std::max(worst, sq);
        acc.per_time[l * cp_count + c].Add(sq);
      }
      acc.path_max[l].Add(worst);
    }
  };

  const CurveAccumulator total = ReducePaths(
      config.path_count, config.workers, identity, work,
      [](CurveAccumulator& a, const CurveAccumulator& b) { a.Merge(b); });

  ErrorCurve curve;
  curve.drift_name = drift.name;
  curve.dimension = d;
  curve.horizon = config.horizon;
  curve.offset = config.offset;
  curve.levels = config.levels;
  curve.path_count = config.path_count;
  curve.n_ref = config.n_ref;
  curve.reference_kind = request.kind;
  for (std::int64_t j : checkpoints) {
    curve.checkpoint_times.push_back(static_cast<double>(j) / static_cast<double>(config.n_ref));
  }
  for (std::size_t l = 0; l < level_count; ++l) {
    curve.mse.push_back(total.path_max[l].mean());
    curve.ci_half_width.push_back(total.path_max[l].ci95_half_width());
    std::size_t best = 0;
    for (std::size_t c = 1; c < cp_count; ++c) {
      if (total.per_time[l * cp_count + c].mean() > total.per_time[l * cp_count + best].mean()) {
        best = c;
      }
    }
    curve.mse_time_max.push_back(total.per_time[l * cp_count + best].mean());
    curve.ci_time_max.push_back(total.per_time[l * cp_count + best].ci95_half_width());
  }
  return curve;
}

}  // namespace emlab
