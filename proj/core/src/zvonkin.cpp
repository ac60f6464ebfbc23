#include "emlab/zvonkin.hpp"

#include <algorithm>
#include <cmath>

#include "emlab/csv.hpp"
#include "emlab/em_engine.hpp"
#include "emlab/error.hpp"
#include "emlab/parallel.hpp"
#include "emlab/rng_paths.hpp"
#include "emlab/streaming_stats.hpp"

namespace emlab {
namespace {

constexpr double kWindow = 2.0;

struct Localised {
  const DriftSpec& drift;
  double z;

  double Indicator(double s) const { return std::abs(s - z) <= kWindow ? 1.0 : 0.0; }
  double Value(double s) const { return Indicator(s) * drift.Scalar(s); }

  // Midpoint rule with `parts` subintervals of [a, b] (a < b).
  double Midpoint(double a, double b, int parts) const {
    const double width = (b - a) / parts;
    double sum = 0.0;
    for (int q = 0; q < parts; ++q) sum += Value(a + (q + 0.5) * width);
    return width * sum;
  }

  bool IsJump(double x, double tolerance) const {
    if (std::abs(std::abs(x - z) - kWindow) <= tolerance) return true;
    return !drift.jumps_1d(x - tolerance, x + tolerance).empty();
  }
};

}  // namespace

ScaleTable BuildScaleTable(const DriftSpec& drift, double z, double radius, double step) {
  if (drift.dimension != 1) throw InvalidArgument("scale functions are one-dimensional");
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("table step must be positive");
  if (!(radius >= kWindow)) throw InvalidArgument("table radius must be at least 2");
  if (!std::isfinite(drift.sup_bound)) throw InvalidArgument("drift must be bounded");
  const double half_ratio = radius / step;
  const auto half = static_cast<std::int64_t>(std::llround(half_ratio));
  if (std::abs(half_ratio - static_cast<double>(half)) > 1e-6) {
    throw InvalidArgument("table radius must be an integer multiple of the step");
  }

  ScaleTable table;
  table.center_ = z;
  table.radius_ = radius;
  table.step_ = step;
  const auto count = static_cast<std::size_t>(2 * half + 1);
  const auto mid = static_cast<std::size_t>(half);
  table.grid_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    table.grid_[i] = z + static_cast<double>(static_cast<std::int64_t>(i) - half) * step;
  }

  const Localised local{drift, z};
  std::vector<double> inner(count, 0.0);
  for (std::size_t i = mid + 1; i < count; ++i) {
    inner[i] = inner[i - 1] + local.Midpoint(table.grid_[i - 1], table.grid_[i], 4);
  }
  for (std::size_t i = mid; i-- > 0;) {
    inner[i] = inner[i + 1] - local.Midpoint(table.grid_[i], table.grid_[i + 1], 4);
  }

  table.phi_prime_.resize(count);
  table.phi_second_.resize(count);
  table.phi_second_left_.resize(count);
  table.phi_second_right_.resize(count);
  const double jump_tolerance = 1e-9 * step;
  const double probe = 1e-7 * step;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = table.grid_[i];
    const double d1 = std::exp(-2.0 * inner[i]);
    table.phi_prime_[i] = d1;
    table.phi_second_[i] = -2.0 * local.Value(x) * d1;
    if (local.IsJump(x, jump_tolerance)) {
      table.phi_second_left_[i] = -2.0 * local.Value(x - probe) * d1;
      table.phi_second_right_[i] = -2.0 * local.Value(x + probe) * d1;
    } else {
      table.phi_second_left_[i] = table.phi_second_right_[i] = table.phi_second_[i];
    }
  }

  // Outer integral from the centre, then shift so that phi(0) = 0.
  std::vector<double> outer(count, 0.0);
  auto panel = [&](std::size_t i) {
    return 0.5 * step * (table.phi_prime_[i] + table.phi_prime_[i + 1]) +
           step * step / 12.0 * (table.phi_second_right_[i] - table.phi_second_left_[i + 1]);
  };
  for (std::size_t i = mid + 1; i < count; ++i) outer[i] = outer[i - 1] + panel(i - 1);
  for (std::size_t i = mid; i-- > 0;) outer[i] = outer[i + 1] - panel(i);
  table.phi_ = outer;
  const double at_origin = table.Phi(0.0);
  for (double& v : table.phi_) v -= at_origin;

  if (!table.StrictlyIncreasing()) {
    throw NumericalFailure("scale function table is not strictly increasing");
  }

  table.psi_grid_.resize(count);
  table.psi_.resize(count);
  const double lo = table.phi_.front();
  const double hi = table.phi_.back();
  for (std::size_t i = 0; i < count; ++i) {
    const double y = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    table.psi_grid_[i] = y;
    table.psi_[i] = table.Psi(y);
  }
  return table;
}

std::size_t ScaleTable::PanelOf(double x) const {
  const double position = (x - grid_.front()) / step_;
  auto panel = static_cast<std::int64_t>(std::floor(position));
  panel = std::clamp<std::int64_t>(panel, 0, static_cast<std::int64_t>(grid_.size()) - 2);
  return static_cast<std::size_t>(panel);
}

double ScaleTable::HermiteValue(std::size_t i, double t) const {
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * phi_[i] + h10 * step_ * phi_prime_[i] + h01 * phi_[i + 1] +
         h11 * step_ * phi_prime_[i + 1];
}

double ScaleTable::HermiteSlope(std::size_t i, double t) const {
  const double t2 = t * t;
  const double d00 = 6 * t2 - 6 * t;
  const double d10 = 3 * t2 - 4 * t + 1;
  const double d01 = -6 * t2 + 6 * t;
  const double d11 = 3 * t2 - 2 * t;
  return (d00 * phi_[i] + d01 * phi_[i + 1]) / step_ + d10 * phi_prime_[i] +
         d11 * phi_prime_[i + 1];
}

double ScaleTable::Phi(double x) const {
  if (x <= grid_.front()) return phi_.front() + phi_prime_.front() * (x - grid_.front());
  if (x >= grid_.back()) return phi_.back() + phi_prime_.back() * (x - grid_.back());
  const std::size_t i = PanelOf(x);
  return HermiteValue(i, (x - grid_[i]) / step_);
}

double ScaleTable::PhiPrime(double x) const {
  if (x <= grid_.front()) return phi_prime_.front();
  if (x >= grid_.back()) return phi_prime_.back();
  const std::size_t i = PanelOf(x);
  const double t = (x - grid_[i]) / step_;
  // Hermite interpolation of phi' with one-sided phi'' slopes.
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * phi_prime_[i] + (t3 - 2 * t2 + t) * step_ * phi_second_right_[i] +
         (-2 * t3 + 3 * t2) * phi_prime_[i + 1] + (t3 - t2) * step_ * phi_second_left_[i + 1];
}

double ScaleTable::Psi(double y) const {
  if (y <= phi_.front()) return grid_.front() + (y - phi_.front()) / phi_prime_.front();
  if (y >= phi_.back()) return grid_.back() + (y - phi_.back()) / phi_prime_.back();
  const auto upper = std::upper_bound(phi_.begin(), phi_.end(), y);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(upper - phi_.begin() - 1, 0));
  const std::size_t panel = std::min(i, phi_.size() - 2);
  double lo = 0.0, hi = 1.0;
  for (int iteration = 0; iteration < 64 && hi - lo > 0x1.0p-52; ++iteration) {
    const double mid = 0.5 * (lo + hi);
    if (HermiteValue(panel, mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double t = 0.5 * (lo + hi);
  const double slope = HermiteSlope(panel, t);
  if (slope > 0.0) {
    t -= (HermiteValue(panel, t) - y) / (slope * step_);
    t = std::clamp(t, 0.0, 1.0);
  }
  return grid_[panel] + t * step_;
}

bool ScaleTable::StrictlyIncreasing() const noexcept {
  for (std::size_t i = 1; i < phi_.size(); ++i) {
    if (!(phi_[i] > phi_[i - 1])) return false;
  }
  return true;
}

double ScaleTable::LocalisationGap() const noexcept {
  double gap = 0.0;
  const double left_value = PhiPrime(center_ - kWindow);
  const double right_value = PhiPrime(center_ + kWindow);
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const double offset = grid_[i] - center_;
    if (offset <= -kWindow) gap = std::max(gap, std::abs(phi_prime_[i] - left_value));
    if (offset >= kWindow) gap = std::max(gap, std::abs(phi_prime_[i] - right_value));
  }
  return gap;
}

OdeResidualReport VerifyOdeResidual(const ScaleTable& table, const DriftSpec& drift,
                                    double tolerance_scale) {
  if (drift.dimension != 1) throw InvalidArgument("scale functions are one-dimensional");
  OdeResidualReport report;
  const double h = table.step();
  const double z = table.center();
  const auto x = table.grid();
  const auto d1 = table.phi_prime();
  const auto d2 = table.phi_second();
  report.tolerance = tolerance_scale * h * h * std::pow(1.0 + drift.sup_bound, 3);
  const double probe = 1e-7 * h;
  const double jump_tolerance = 1e-9 * h;

  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (std::abs(x[i] - z) >= kWindow - 0.5 * h) continue;  // window edge or outside
    const auto jumps = drift.jumps_1d(x[i - 1] + jump_tolerance, x[i + 1] - jump_tolerance);
    if (!jumps.empty()) {
      ++report.points_excluded;
      // A jump sitting on the node: one-sided second-order stencils.
      if (std::abs(jumps.front() - x[i]) <= jump_tolerance && i >= 2 && i + 2 < x.size()) {
        OneSidedResidual side;
        side.x = x[i];
        const double left_second = (3 * d1[i] - 4 * d1[i - 1] + d1[i - 2]) / (2 * h);
        const double right_second = (-3 * d1[i] + 4 * d1[i + 1] - d1[i + 2]) / (2 * h);
        side.left = 0.5 * left_second + drift.Scalar(x[i] - probe) * d1[i];
        side.right = 0.5 * right_second + drift.Scalar(x[i] + probe) * d1[i];
        report.one_sided.push_back(side);
      }
      continue;
    }
    const double b = drift.Scalar(x[i]);
    const double fd_second = (d1[i + 1] - d1[i - 1]) / (2 * h);
    report.max_fd_residual = std::max(report.max_fd_residual, std::abs(0.5 * fd_second + b * d1[i]));
    report.max_analytic_residual =
        std::max(report.max_analytic_residual, std::abs(0.5 * d2[i] + b * d1[i]));
    report.max_identity_gap = std::max(report.max_identity_gap, std::abs(fd_second - d2[i]));
    ++report.points_checked;
  }
  report.passed = report.max_fd_residual <= report.tolerance;
  return report;
}

LipschitzBoundReport VerifyLipschitzBounds(const ScaleTable& table, const DriftSpec& drift) {
  LipschitzBoundReport report;
  const double s = drift.sup_bound;
  report.bound = std::exp(8.0 * s) * (1.0 + 2.0 * s) * (1.0 + 2.0 * s);
  const auto d1 = table.phi_prime();
  const auto left = table.phi_second_left();
  const auto right = table.phi_second_right();
  for (std::size_t i = 0; i < d1.size(); ++i) {
    const double second = std::max(std::abs(left[i]), std::abs(right[i]));
    report.sup_phi_prime = std::max(report.sup_phi_prime, std::abs(d1[i]));
    report.sup_phi_second = std::max(report.sup_phi_second, second);
    report.sup_psi_prime = std::max(report.sup_psi_prime, 1.0 / d1[i]);
    report.sup_phi_prime_of_psi_derivative =
        std::max(report.sup_phi_prime_of_psi_derivative, second / d1[i]);
  }
  report.passed = report.sup_phi_prime <= report.bound && report.sup_phi_second <= report.bound &&
                  report.sup_psi_prime <= report.bound &&
                  report.sup_phi_prime_of_psi_derivative <= report.bound;
  return report;
}

DriftlessnessReport TransformedDriftlessnessCheck(const DriftSpec& drift,
                                                  const DriftlessnessConfig& config) {
  if (drift.dimension != 1) throw InvalidArgument("driftlessness check is one-dimensional");
  if (!(config.window > 0.0 && config.window < kWindow)) {
    throw InvalidArgument("stopping window must lie in (0, 2)");
  }
  if (config.path_count < 2) throw InvalidArgument("need at least two paths");
  const ScaleTable table =
      BuildScaleTable(drift, config.z, config.table_radius, config.table_step);
  const double start = table.Phi(config.z);
  const double x0[1] = {config.z};

  struct Acc {
    RunningMoments increments;
    std::uint64_t exited = 0;
  };
  auto work = [&](std::uint64_t p, Acc& acc) {
    const BrownianTableau tableau =
        BrownianTableau::Generate(PathSeed{config.seed, p}, 1, config.level, config.horizon);
    const SchemePath path = SimulateEm(drift, tableau, config.level, x0);
    double stopped = path.State(path.steps())[0];
    for (std::int64_t k = 0; k <= path.steps(); ++k) {
      const double x = path.State(k)[0];
      if (std::abs(x - config.z) > config.window) {
        stopped = x;
        ++acc.exited;
        break;
      }
    }
    acc.increments.Add(table.Phi(stopped) - start);
  };
  const Acc total = ReducePaths(config.path_count, config.workers, Acc{}, work,
                                [](Acc& a, const Acc& b) {
                                  a.increments.Merge(b.increments);
                                  a.exited += b.exited;
                                });

  DriftlessnessReport report;
  report.path_count = config.path_count;
  report.mean_increment = total.increments.mean();
  report.standard_error = total.increments.standard_error();
  report.z_score = report.standard_error > 0.0 ? report.mean_increment / report.standard_error : 0.0;
  report.exited_fraction =
      static_cast<double>(total.exited) / static_cast<double>(config.path_count);
  report.passed = std::abs(report.mean_increment) <= config.sigma_threshold * report.standard_error;
  return report;
}

void WriteScaleTableCsv(const std::filesystem::path& file, const ScaleTable& table) {
  CsvWriter csv(file);
  csv.Header({"x", "phi", "phi_prime", "psi"});
  for (std::size_t i = 0; i < table.size(); ++i) {
    csv.Begin();
    csv.Field(table.grid()[i]);
    csv.Field(table.phi()[i]);
    csv.Field(table.phi_prime()[i]);
    csv.Field(table.Psi(table.grid()[i]));
    csv.End();
  }
}

}  // namespace emlab
