#include "emlab/kolmogorov.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "emlab/csv.hpp"
#include "emlab/error.hpp"
#include "emlab/rate_analysis.hpp"

namespace emlab {
namespace {

constexpr double kPadding = 6.0;       // interior sits 6 sqrt(T) inside the box
constexpr double kKernelCutoff = 8.0;  // kernel truncation in units of sqrt(t)

std::int64_t IntPow(std::int64_t base, int exponent) {
  std::int64_t result = 1;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

// Runs body(begin, end) over [0, total) split into contiguous ranges.
template <class Body>
void ParallelRanges(std::int64_t total, int workers, Body&& body) {
  const int count = static_cast<int>(std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(total / 4096, 1)));
  if (count <= 1) {
    body(std::int64_t{0}, total);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(count);
  for (int w = 0; w < count; ++w) {
    const std::int64_t begin = total * w / count;
    const std::int64_t end = total * (w + 1) / count;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

void ValidateGrids(const SpaceGrid& space, const TimeGrid& time) {
  std::vector<std::string> problems;
  if (space.dimension != 1 && space.dimension != 2) problems.emplace_back("PDE dimension must be 1 or 2");
  if (space.points < 3) problems.emplace_back("space grid needs at least 3 points");
  if (!(space.half_width > 0.0)) problems.emplace_back("box half-width must be positive");
  if (time.steps < 1) problems.emplace_back("time grid needs at least one step");
  if (!(time.horizon > 0.0 && time.horizon <= 1.0)) problems.emplace_back("horizon must lie in (0, 1]");
  if (problems.empty()) {
    const double hx = space.step();
    if (time.step() < hx * hx) problems.emplace_back("time step below hx^2: kernel under-resolved");
    if (space.half_width - kPadding * std::sqrt(time.horizon) <= 0.0) {
      problems.emplace_back("box too small for horizon: need L > 6 sqrt(T)");
    }
  }
  if (!problems.empty()) {
    std::string message = problems.front();
    for (std::size_t i = 1; i < problems.size(); ++i) message += "; " + problems[i];
    throw InvalidArgument(message);
  }
}

// Applies P_ht along every axis: out = P in. `scratch` has the slice size.
void ApplySemigroup(const HeatKernel& kernel, const SpaceGrid& space, std::span<const double> in,
                    std::span<double> out, std::span<double> scratch, int workers) {
  if (space.dimension == 1) {
    kernel.ConvolveAxis(in, out, space.points, 1, workers);
    return;
  }
  kernel.ConvolveAxis(in, scratch, space.points, space.points, workers);
  kernel.ConvolveAxis(scratch, out, space.points, 1, workers);
}

struct Marcher {
  const SpaceGrid& space;
  const TimeGrid& time;
  HeatKernel kernel;
  int workers;
  std::vector<double> buffer, scratch;

  Marcher(const SpaceGrid& s, const TimeGrid& t, int w)
      : space(s), time(t), kernel(HeatKernel::Build(t.step(), s.step())), workers(w),
        buffer(static_cast<std::size_t>(s.size())), scratch(static_cast<std::size_t>(s.size())) {}

  // One trapezoid step: next = P[prev + ht/2 h_prev] + ht/2 h_next.
  void Step(std::span<const double> prev, std::span<const double> source_prev,
            std::span<const double> source_next, std::span<double> next) {
    const double half = 0.5 * time.step();
    for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = prev[i] + half * source_prev[i];
    ApplySemigroup(kernel, space, buffer, next, scratch, workers);
    for (std::size_t i = 0; i < buffer.size(); ++i) next[i] += half * source_next[i];
  }
};

// Source slices g(t_k, x) for k = 0..steps, concatenated.
std::vector<double> SampleSource(const SourceFn& g, const GridField& field) {
  const std::int64_t size = field.space().size();
  const std::int64_t slices = field.time().steps + 1;
  std::vector<double> samples(static_cast<std::size_t>(size * slices));
  for (std::int64_t flat = 0; flat < size; ++flat) {
    const std::vector<double> x = field.Point(flat);
    for (std::int64_t k = 0; k < slices; ++k) {
      const double value = g(field.time().Time(k), x);
      if (!std::isfinite(value)) throw InvalidArgument("source term is not finite");
      samples[static_cast<std::size_t>(k * size + flat)] = value;
    }
  }
  return samples;
}

std::vector<double> SampleDrift(const DriftSpec& f, const GridField& field) {
  if (f.dimension != field.space().dimension) {
    throw InvalidArgument("drift dimension does not match the PDE grid");
  }
  const std::int64_t size = field.space().size();
  const int d = field.space().dimension;
  std::vector<double> values(static_cast<std::size_t>(size * d));
  std::vector<double> out(static_cast<std::size_t>(d));
  for (std::int64_t flat = 0; flat < size; ++flat) {
    const std::vector<double> x = field.Point(flat);
    f.evaluate(x, out);
    std::copy(out.begin(), out.end(), values.begin() + flat * d);
  }
  return values;
}

bool IsZeroDrift(const DriftSpec& f) {
  if (!f.constant_value) return false;
  return std::all_of(f.constant_value->begin(), f.constant_value->end(),
                     [](double c) { return c == 0.0; });
}

// h_k = g_k + f . grad u_k for one slice.
void DriftSource(const GridField& u, std::int64_t k, std::span<const double> g_slice,
                 std::span<const double> drift, std::span<double> out) {
  const int d = u.space().dimension;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    double value = g_slice[flat];
    for (int axis = 0; axis < d; ++axis) {
      value += drift[flat * d + axis] * u.Gradient(k, static_cast<std::int64_t>(flat), axis);
    }
    out[flat] = value;
  }
}

double MaxGap(const GridField& a, const GridField& b) {
  double gap = 0.0;
  for (std::int64_t k = 0; k <= a.time().steps; ++k) {
    const auto x = a.Slice(k);
    const auto y = b.Slice(k);
    for (std::size_t i = 0; i < x.size(); ++i) gap = std::max(gap, std::abs(x[i] - y[i]));
  }
  return gap;
}

enum class Direction { kForward, kBackward };

DriftPdeSolution SolveFixedPoint(const DriftSpec& f, const SourceFn& g, const SpaceGrid& space,
                                 const TimeGrid& time, const DriftPdeOptions& options,
                                 Direction direction) {
  ValidateGrids(space, time);
  if (options.max_iter < 1 || !(options.tol > 0.0)) {
    throw InvalidArgument("max_iter must be positive and tol positive");
  }
  GridField current(space, time);
  const std::vector<double> g_samples = SampleSource(g, current);
  const std::vector<double> drift = SampleDrift(f, current);
  const bool zero_drift = IsZeroDrift(f);
  const std::int64_t size = space.size();
  const std::int64_t steps = time.steps;
  Marcher marcher(space, time, options.workers);
  std::vector<double> source((static_cast<std::size_t>(steps + 1)) * static_cast<std::size_t>(size));

  auto g_slice = [&](std::int64_t k) {
    return std::span<const double>(g_samples).subspan(static_cast<std::size_t>(k * size),
                                                      static_cast<std::size_t>(size));
  };
  auto source_slice = [&](std::int64_t k) {
    return std::span<double>(source).subspan(static_cast<std::size_t>(k * size),
                                             static_cast<std::size_t>(size));
  };

  DriftPdeSolution solution{GridField(space, time), 0, 0.0, 0.0};
  double previous_gap = 0.0;
  for (int iteration = 1; iteration <= options.max_iter; ++iteration) {
    for (std::int64_t k = 0; k <= steps; ++k) {
      if (zero_drift) {
        std::copy(g_slice(k).begin(), g_slice(k).end(), source_slice(k).begin());
      } else {
        DriftSource(current, k, g_slice(k), drift, source_slice(k));
      }
    }
    GridField next(space, time);
    if (direction == Direction::kForward) {
      for (std::int64_t k = 0; k < steps; ++k) {
        marcher.Step(next.Slice(k), source_slice(k), source_slice(k + 1), next.Slice(k + 1));
      }
    } else {
      for (std::int64_t k = steps; k > 0; --k) {
        marcher.Step(next.Slice(k), source_slice(k), source_slice(k - 1), next.Slice(k - 1));
      }
    }
    const double gap = MaxGap(next, current);
    solution.contraction_factor = previous_gap > 0.0 ? gap / previous_gap : 0.0;
    solution.final_gap = gap;
    solution.iterations = iteration;
    current = std::move(next);
    // Zero drift: the first iterate is already the fixed point.
    if (zero_drift || (iteration > 1 && gap <= options.tol)) {
      solution.field = std::move(current);
      return solution;
    }
    if (!std::isfinite(gap)) break;
    previous_gap = gap;
  }
  throw NumericalFailure("fixed-point iteration did not converge within " +
                         std::to_string(options.max_iter) + " iterations; measured contraction factor " +
                         std::to_string(solution.contraction_factor) + ", last gap " +
                         std::to_string(solution.final_gap));
}

}  // namespace

std::int64_t SpaceGrid::size() const noexcept { return IntPow(points, dimension); }

HeatKernel HeatKernel::Build(double t, double hx) {
  if (!(hx > 0.0) || !(t >= hx * hx)) {
    throw InvalidArgument("heat kernel under-resolved: need t >= hx^2");
  }
  HeatKernel kernel;
  kernel.time_ = t;
  kernel.radius_ = static_cast<std::int64_t>(std::ceil(kKernelCutoff * std::sqrt(t) / hx));
  kernel.weights_.resize(static_cast<std::size_t>(2 * kernel.radius_ + 1));
  double sum = 0.0;
  for (std::int64_t j = -kernel.radius_; j <= kernel.radius_; ++j) {
    const double x = static_cast<double>(j) * hx;
    const double w = std::exp(-x * x / (2.0 * t));
    kernel.weights_[static_cast<std::size_t>(j + kernel.radius_)] = w;
    sum += w;
  }
  for (double& w : kernel.weights_) w /= sum;
  const double cut = static_cast<double>(kernel.radius_) * hx + 0.5 * hx;
  kernel.truncated_mass_ = std::erfc(cut / std::sqrt(2.0 * t));
  return kernel;
}

void HeatKernel::ConvolveAxis(std::span<const double> in, std::span<double> out,
                              std::int64_t extent, std::int64_t stride, int workers) const {
  const auto total = static_cast<std::int64_t>(in.size());
  const double* w = weights_.data() + radius_;
  ParallelRanges(total, workers, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t flat = begin; flat < end; ++flat) {
      const std::int64_t i = (flat / stride) % extent;
      const std::int64_t lo = std::max(-radius_, -i);
      const std::int64_t hi = std::min(radius_, extent - 1 - i);
      double sum = 0.0;
      for (std::int64_t j = lo; j <= hi; ++j) sum += w[j] * in[static_cast<std::size_t>(flat + j * stride)];
      out[static_cast<std::size_t>(flat)] = sum;
    }
  });
}

GridField::GridField(SpaceGrid space, TimeGrid time)
    : space_(space), time_(time), slice_size_(space.size()),
      values_(static_cast<std::size_t>(slice_size_ * (time.steps + 1)), 0.0) {}

std::span<const double> GridField::Slice(std::int64_t k) const noexcept {
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(k * slice_size_),
                                                  static_cast<std::size_t>(slice_size_));
}

std::span<double> GridField::Slice(std::int64_t k) noexcept {
  return std::span<double>(values_).subspan(static_cast<std::size_t>(k * slice_size_),
                                            static_cast<std::size_t>(slice_size_));
}

std::int64_t GridField::AxisIndex(std::int64_t flat, int axis) const noexcept {
  const std::int64_t stride = IntPow(space_.points, space_.dimension - 1 - axis);
  return (flat / stride) % space_.points;
}

std::int64_t GridField::Neighbor(std::int64_t flat, int axis, int offset) const noexcept {
  return flat + offset * IntPow(space_.points, space_.dimension - 1 - axis);
}

double GridField::Gradient(std::int64_t k, std::int64_t flat, int axis) const noexcept {
  const auto u = Slice(k);
  const double hx = space_.step();
  const std::int64_t i = AxisIndex(flat, axis);
  if (i == 0) return (u[Neighbor(flat, axis, 1)] - u[flat]) / hx;
  if (i == space_.points - 1) return (u[flat] - u[Neighbor(flat, axis, -1)]) / hx;
  return (u[Neighbor(flat, axis, 1)] - u[Neighbor(flat, axis, -1)]) / (2.0 * hx);
}

double GridField::Hessian(std::int64_t k, std::int64_t flat, int a, int b) const noexcept {
  const double hx = space_.step();
  const std::int64_t last = space_.points - 1;
  auto clamp_center = [&](std::int64_t f, int axis) {
    const std::int64_t i = AxisIndex(f, axis);
    if (i == 0) return Neighbor(f, axis, 1);
    if (i == last) return Neighbor(f, axis, -1);
    return f;
  };
  if (a == b) {
    const auto u = Slice(k);
    const std::int64_t c = clamp_center(flat, a);
    return (u[Neighbor(c, a, 1)] - 2.0 * u[c] + u[Neighbor(c, a, -1)]) / (hx * hx);
  }
  const std::int64_t c = clamp_center(flat, b);
  return (Gradient(k, Neighbor(c, b, 1), a) - Gradient(k, Neighbor(c, b, -1), a)) / (2.0 * hx);
}

double GridField::interior_half_width() const noexcept {
  return space_.half_width - kPadding * std::sqrt(time_.horizon);
}

bool GridField::Interior(std::int64_t flat) const noexcept {
  const double limit = interior_half_width() + 1e-12;
  for (int axis = 0; axis < space_.dimension; ++axis) {
    if (std::abs(space_.Coordinate(AxisIndex(flat, axis))) > limit) return false;
  }
  return true;
}

double GridField::MaxNorm(std::int64_t k) const noexcept {
  const auto u = Slice(k);
  double norm = 0.0;
  for (std::int64_t flat = 0; flat < slice_size_; ++flat) {
    if (Interior(flat)) norm = std::max(norm, std::abs(u[flat]));
  }
  return norm;
}

double GridField::MaxNorm() const noexcept {
  double norm = 0.0;
  for (std::int64_t k = 0; k <= time_.steps; ++k) norm = std::max(norm, MaxNorm(k));
  return norm;
}

double GridField::MaxGradient() const noexcept {
  double norm = 0.0;
  for (std::int64_t k = 0; k <= time_.steps; ++k) {
    for (std::int64_t flat = 0; flat < slice_size_; ++flat) {
      if (!Interior(flat)) continue;
      for (int axis = 0; axis < space_.dimension; ++axis) {
        norm = std::max(norm, std::abs(Gradient(k, flat, axis)));
      }
    }
  }
  return norm;
}

double GridField::MaxHessian() const noexcept {
  double norm = 0.0;
  for (std::int64_t k = 0; k <= time_.steps; ++k) {
    for (std::int64_t flat = 0; flat < slice_size_; ++flat) {
      if (!Interior(flat)) continue;
      for (int a = 0; a < space_.dimension; ++a) {
        for (int b = a; b < space_.dimension; ++b) {
          norm = std::max(norm, std::abs(Hessian(k, flat, a, b)));
        }
      }
    }
  }
  return norm;
}

std::vector<double> GridField::Point(std::int64_t flat) const {
  std::vector<double> x(static_cast<std::size_t>(space_.dimension));
  for (int axis = 0; axis < space_.dimension; ++axis) x[axis] = space_.Coordinate(AxisIndex(flat, axis));
  return x;
}

GridField HeatMildSolve(const SourceFn& g, const SpaceGrid& space, const TimeGrid& time,
                        int workers) {
  DriftPdeOptions options;
  options.workers = workers;
  return SolveFixedPoint(Builtin("zero", space.dimension), g, space, time, options,
                         Direction::kForward)
      .field;
}

DriftPdeSolution DriftPdeSolve(const DriftSpec& f, const SourceFn& g, const SpaceGrid& space,
                               const TimeGrid& time, const DriftPdeOptions& options) {
  return SolveFixedPoint(f, g, space, time, options, Direction::kForward);
}

DriftPdeSolution BackwardDriftPdeSolve(const DriftSpec& f, const SourceFn& g,
                                       const SpaceGrid& space, const TimeGrid& time,
                                       const DriftPdeOptions& options) {
  return SolveFixedPoint(f, g, space, time, options, Direction::kBackward);
}

WorkableHorizon FindWorkableHorizon(const DriftSpec& f, const SourceFn& g, const SpaceGrid& space,
                                    double initial_horizon, std::int64_t time_steps,
                                    const DriftPdeOptions& options, int max_halvings) {
  double horizon = initial_horizon;
  const double hx = space.step();
  for (int halvings = 0; halvings <= max_halvings; ++halvings, horizon *= 0.5) {
    if (halvings > 0 && horizon / static_cast<double>(time_steps) < hx * hx) {
      throw NumericalFailure("no workable horizon above T = " + std::to_string(2.0 * horizon) +
                             "; smaller T would put the time step below hx^2");
    }
    try {
      const DriftPdeSolution solution = DriftPdeSolve(f, g, space, TimeGrid{horizon, time_steps}, options);
      return WorkableHorizon{horizon, halvings, solution.contraction_factor, solution.iterations};
    } catch (const NumericalFailure&) {
    }
  }
  throw NumericalFailure("no workable horizon found after " + std::to_string(max_halvings) +
                         " halvings of T = " + std::to_string(initial_horizon));
}

double GradientHolderQuotient(const GridField& field, double exponent, int slice_count,
                              std::int64_t stride) {
  if (slice_count < 1 || stride < 1) throw InvalidArgument("slice_count and stride must be positive");
  const SpaceGrid& space = field.space();
  const int d = space.dimension;
  std::vector<std::int64_t> nodes;
  for (std::int64_t flat = 0; flat < space.size(); ++flat) {
    if (!field.Interior(flat)) continue;
    const std::vector<double> x = field.Point(flat);
    bool keep = true;
    for (int axis = 0; axis < d; ++axis) {
      const auto i = static_cast<std::int64_t>(std::llround((x[axis] + space.half_width) / space.step()));
      keep = keep && i % stride == 0;
    }
    if (keep) nodes.push_back(flat);
  }
  double quotient = 0.0;
  const std::int64_t steps = field.time().steps;
  std::vector<double> gradients(nodes.size() * d);
  std::vector<std::vector<double>> points;
  points.reserve(nodes.size());
  for (std::int64_t node : nodes) points.push_back(field.Point(node));
  for (int s = 1; s <= slice_count; ++s) {
    const std::int64_t k = std::max<std::int64_t>(1, steps * s / slice_count);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (int axis = 0; axis < d; ++axis) gradients[a * d + axis] = field.Gradient(k, nodes[a], axis);
    }
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (std::size_t b = a + 1; b < nodes.size(); ++b) {
        double distance2 = 0.0, difference2 = 0.0;
        for (int axis = 0; axis < d; ++axis) {
          const double dx = points[a][axis] - points[b][axis];
          const double dg = gradients[a * d + axis] - gradients[b * d + axis];
          distance2 += dx * dx;
          difference2 += dg * dg;
        }
        quotient = std::max(quotient, std::sqrt(difference2) / std::pow(distance2, 0.5 * exponent));
      }
    }
  }
  return quotient;
}

KernelBlowupReport VerifyKernelBlowup(double hx, double half_width, std::span<const double> times) {
  if (times.size() < 3) throw InvalidArgument("kernel blow-up check needs at least 3 times");
  if (!(hx > 0.0) || !(half_width > hx)) throw InvalidArgument("bad lattice for kernel check");
  for (double t : times) {
    if (!(t >= 4.0 * hx * hx)) throw InvalidArgument("kernel under-resolved: need t >= 4 hx^2");
  }
  KernelBlowupReport report;
  const auto reach = static_cast<std::int64_t>(std::floor(half_width / hx));
  const double root_two_pi = std::sqrt(2.0 * std::numbers::pi);
  std::vector<double> log_t, log_norm[3];
  for (double t : times) {
    std::vector<double> p(static_cast<std::size_t>(2 * reach + 1));
    for (std::int64_t j = -reach; j <= reach; ++j) {
      const double x = static_cast<double>(j) * hx;
      p[static_cast<std::size_t>(j + reach)] = std::exp(-x * x / (2.0 * t)) / (root_two_pi * std::sqrt(t));
    }
    double norms[3] = {0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < p.size(); ++j) {
      norms[0] += p[j] * hx;
      if (j + 1 < p.size()) norms[1] += std::abs(p[j + 1] - p[j]);
      if (j >= 1 && j + 1 < p.size()) norms[2] += std::abs(p[j + 1] - 2.0 * p[j] + p[j - 1]) / hx;
    }
    const double closed[3] = {1.0, 2.0 / (root_two_pi * std::sqrt(t)),
                              4.0 * std::exp(-0.5) / (t * root_two_pi)};
    const double outside = std::erfc(static_cast<double>(reach) * hx / std::sqrt(2.0 * t));
    log_t.push_back(std::log(t));
    for (int k = 0; k < 3; ++k) {
      report.rows.push_back(KernelNormRow{k, t, norms[k], closed[k], outside});
      log_norm[k].push_back(std::log(norms[k]));
    }
  }
  report.passed = true;
  for (int k = 0; k < 3; ++k) {
    report.slopes[k] = FitLine(log_t, log_norm[k]).slope;
    report.passed = report.passed && std::abs(report.slopes[k] + 0.5 * k) <= report.tolerance;
  }
  return report;
}

void WriteGridFieldCsv(const std::filesystem::path& file, const GridField& field,
                       std::int64_t slice_stride, std::int64_t node_stride) {
  if (slice_stride < 1 || node_stride < 1) throw InvalidArgument("strides must be positive");
  const int d = field.space().dimension;
  CsvWriter csv(file);
  if (d == 1) {
    csv.Header({"t", "x", "u", "grad_u"});
  } else {
    csv.Header({"t", "x1", "x2", "u", "grad_u1", "grad_u2"});
  }
  for (std::int64_t k = 0; k <= field.time().steps; k += slice_stride) {
    for (std::int64_t flat = 0; flat < field.space().size(); flat += node_stride) {
      csv.Begin();
      csv.Field(field.time().Time(k));
      for (double coordinate : field.Point(flat)) csv.Field(coordinate);
      csv.Field(field.Value(k, flat));
      for (int axis = 0; axis < d; ++axis) csv.Field(field.Gradient(k, flat, axis));
      csv.End();
    }
  }
}

void WriteKernelNormsCsv(const std::filesystem::path& file, const KernelBlowupReport& report) {
  CsvWriter csv(file);
  csv.Header({"k", "t", "l1_norm"});
  for (const KernelNormRow& row : report.rows) {
    csv.Begin();
    csv.Field(static_cast<std::int64_t>(row.order));
    csv.Field(row.time);
    csv.Field(row.l1_norm);
    csv.End();
  }
}

}  // namespace emlab
