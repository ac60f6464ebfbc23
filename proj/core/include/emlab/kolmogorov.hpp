#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "emlab/drift_catalog.hpp"

namespace emlab {

/// Uniform grid on the box [-L, L]^d with `points` nodes per axis.
struct SpaceGrid {
  int dimension = 1;
  std::int64_t points = 2048;
  double half_width = 8.0;

  double step() const noexcept { return 2.0 * half_width / static_cast<double>(points - 1); }
  double Coordinate(std::int64_t i) const noexcept {
    return -half_width + static_cast<double>(i) * step();
  }
  std::int64_t size() const noexcept;  // points^d
};

struct TimeGrid {
  double horizon = 1.0;
  std::int64_t steps = 128;

  double step() const noexcept { return horizon / static_cast<double>(steps); }
  double Time(std::int64_t k) const noexcept {
    return k == steps ? horizon : static_cast<double>(k) * step();
  }
};

/// Sampled Gaussian p(t, .) on the lattice hx Z, truncated at 8 sqrt(t) and
/// normalised to unit mass. Requires t >= hx^2.
class HeatKernel {
 public:
  static HeatKernel Build(double t, double hx);

  double time() const noexcept { return time_; }
  std::int64_t radius() const noexcept { return radius_; }
  std::span<const double> weights() const noexcept { return weights_; }  // index j + radius
  // Gaussian mass beyond the truncation radius, before normalisation.
  double truncated_mass() const noexcept { return truncated_mass_; }

  /// out = p * in along one axis of a row-major array with zero extension.
  /// `extent` nodes along the axis, consecutive nodes `stride` apart.
  void ConvolveAxis(std::span<const double> in, std::span<double> out, std::int64_t extent,
                    std::int64_t stride, int workers = 1) const;

 private:
  double time_ = 0.0;
  std::int64_t radius_ = 0;
  double truncated_mass_ = 0.0;
  std::vector<double> weights_;
};

/// u on time slices k = 0..steps over the space grid (row-major, axis 0
/// slowest). Derivatives are centered differences, one-sided at the box edge.
class GridField {
 public:
  GridField(SpaceGrid space, TimeGrid time);

  const SpaceGrid& space() const noexcept { return space_; }
  const TimeGrid& time() const noexcept { return time_; }
  std::span<const double> Slice(std::int64_t k) const noexcept;
  std::span<double> Slice(std::int64_t k) noexcept;
  double Value(std::int64_t k, std::int64_t flat) const noexcept { return Slice(k)[flat]; }

  double Gradient(std::int64_t k, std::int64_t flat, int axis) const noexcept;
  double Hessian(std::int64_t k, std::int64_t flat, int axis_a, int axis_b) const noexcept;

  // Nodes with |x_i| <= L - 6 sqrt(T) on every axis, where box effects are
  // below erfc(6 / sqrt 2).
  bool Interior(std::int64_t flat) const noexcept;
  double interior_half_width() const noexcept;

  double MaxNorm(std::int64_t k) const noexcept;  // over the interior
  double MaxNorm() const noexcept;                // over Q_T (interior)
  double MaxGradient() const noexcept;            // max_k,x,i |d_i u|
  double MaxHessian() const noexcept;             // max_k,x,i,j |d_ij u|

  std::vector<double> Point(std::int64_t flat) const;

 private:
  std::int64_t Neighbor(std::int64_t flat, int axis, int offset) const noexcept;
  std::int64_t AxisIndex(std::int64_t flat, int axis) const noexcept;

  SpaceGrid space_;
  TimeGrid time_;
  std::int64_t slice_size_ = 0;
  std::vector<double> values_;
};

using SourceFn = std::function<double(double t, std::span<const double> x)>;

/// u(t) = int_0^t P_{t-s} g(s) ds, trapezoid rule in s with the endpoint
/// s = t taken with the identity kernel. Evaluated by the recursion
///   u_{k+1} = P_ht [u_k + ht/2 g_k] + ht/2 g_{k+1},
/// which unrolls into the trapezoid sum with P_{t_j} replaced by P_ht^j.
/// Throws InvalidArgument when T > 1, ht < hx^2, d not in {1, 2}, or the box
/// leaves no interior (L <= 6 sqrt T).
GridField HeatMildSolve(const SourceFn& g, const SpaceGrid& space, const TimeGrid& time,
                        int workers = 1);

struct DriftPdeOptions {
  int max_iter = 60;
  double tol = 1e-10;
  int workers = 1;
};

struct DriftPdeSolution {
  GridField field;
  int iterations = 0;
  double final_gap = 0.0;
  double contraction_factor = 0.0;  // last gap ratio
};

/// Fixed point of u = mild(f . grad u + g) starting from u = 0. Throws
/// NumericalFailure carrying the measured contraction factor when the gap
/// does not fall below tol within max_iter iterations.
DriftPdeSolution DriftPdeSolve(const DriftSpec& f, const SourceFn& g, const SpaceGrid& space,
                               const TimeGrid& time, const DriftPdeOptions& options = {});

/// Terminal-value problem d_t v + 1/2 Lap v + f . grad v = -g, v(T) = 0,
/// marched backwards from T. Slice k holds v(t_k).
DriftPdeSolution BackwardDriftPdeSolve(const DriftSpec& f, const SourceFn& g,
                                       const SpaceGrid& space, const TimeGrid& time,
                                       const DriftPdeOptions& options = {});

struct WorkableHorizon {
  double horizon = 0.0;
  int halvings = 0;
  double contraction_factor = 0.0;
  int iterations = 0;
};

/// Halves T (keeping the number of time steps) until DriftPdeSolve converges.
/// Throws NumericalFailure once a further halving would make ht < hx^2.
WorkableHorizon FindWorkableHorizon(const DriftSpec& f, const SourceFn& g, const SpaceGrid& space,
                                    double initial_horizon, std::int64_t time_steps,
                                    const DriftPdeOptions& options = {}, int max_halvings = 12);

/// Discrete Hoelder seminorm of grad u with the given exponent over interior
/// node pairs (every `stride`-th node) on `slice_count` evenly spaced slices.
double GradientHolderQuotient(const GridField& field, double exponent, int slice_count = 8,
                              std::int64_t stride = 4);

struct KernelNormRow {
  int order = 0;
  double time = 0.0;
  double l1_norm = 0.0;
  double closed_form = 0.0;
  double truncated_mass = 0.0;  // mass of p(t) outside [-L, L]
};

struct KernelBlowupReport {
  std::vector<KernelNormRow> rows;
  double slopes[3] = {0.0, 0.0, 0.0};
  double tolerance = 0.1;
  bool passed = false;  // |slope_k + k/2| <= tolerance for k = 0, 1, 2
};

/// Discrete L1 norms of p(t), its first difference / hx and second
/// difference / hx^2 on the lattice of [-L, L], and their log-log slopes in t.
/// Throws InvalidArgument if some t < 4 hx^2 or fewer than 3 times.
KernelBlowupReport VerifyKernelBlowup(double hx, double half_width, std::span<const double> times);

/// d = 1: t, x, u, grad_u. d = 2: t, x1, x2, u, grad_u1, grad_u2.
/// `slice_stride` / `node_stride` thin the output.
void WriteGridFieldCsv(const std::filesystem::path& file, const GridField& field,
                       std::int64_t slice_stride = 1, std::int64_t node_stride = 1);
void WriteKernelNormsCsv(const std::filesystem::path& file, const KernelBlowupReport& report);

}  // namespace emlab
