#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace emlab {

/// Identifies one Brownian path. The increment stream is a pure function of
/// this pair, so paths can be regenerated in any order on any worker.
struct PathSeed {
  std::uint64_t experiment_seed = 0;
  std::uint64_t path_index = 0;

  friend bool operator==(const PathSeed&, const PathSeed&) = default;
};

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter Apply(Counter counter, Key key) noexcept;
};

/// Standard normal variates addressed by index. Normal number `i` of a path
/// comes from Philox block i/2 with counter (block, path_index) and key
/// experiment_seed, transformed by Box-Muller.
class NormalStream {
 public:
  explicit NormalStream(PathSeed seed) noexcept;

  std::array<double, 2> Pair(std::uint64_t block) const noexcept;
  double At(std::uint64_t index) const noexcept;
  // Writes normals first_index, first_index + 1, ... into out.
  void Fill(std::span<double> out, std::uint64_t first_index = 0) const noexcept;

 private:
  PathSeed seed_;
};

bool IsPowerOfTwo(std::int64_t n) noexcept;

/// Brownian increments of one path at the finest dyadic grid, plus the
/// prefix sums W_{j/finest_n} in fixed left-to-right order. Immutable after
/// construction apart from Regenerate(), which reuses the storage.
class BrownianTableau {
 public:
  // Throws InvalidArgument unless finest_n is a power of two and
  // horizon * finest_n is an integer.
  static BrownianTableau Generate(PathSeed seed, int dimension, std::int64_t finest_n,
                                  double horizon);

  // Refills this tableau for another seed with the same grid.
  void Regenerate(PathSeed seed);

  int dimension() const noexcept { return dimension_; }
  std::int64_t finest_n() const noexcept { return finest_n_; }
  double horizon() const noexcept { return horizon_; }
  std::int64_t steps() const noexcept { return steps_; }
  const PathSeed& seed() const noexcept { return seed_; }

  // Increment over [j/finest_n, (j+1)/finest_n).
  std::span<const double> Increment(std::int64_t step) const noexcept {
    return {increments_.data() + step * dimension_, static_cast<std::size_t>(dimension_)};
  }
  // W at fine grid index j (0 <= j <= steps()).
  std::span<const double> ValueAtIndex(std::int64_t j) const noexcept {
    return {values_.data() + j * dimension_, static_cast<std::size_t>(dimension_)};
  }
  // W_t for t on the finest grid; throws InvalidArgument otherwise.
  std::vector<double> ValueAt(double t) const;
  // Fine grid index of time t; throws InvalidArgument if t is off-grid.
  std::int64_t IndexOf(double t) const;

  // Increments of the level-m grid: each is the left-to-right sum of
  // finest_n/m consecutive fine increments. Row-major (step, coordinate).
  std::vector<double> Aggregate(std::int64_t level) const;
  // Fine steps per level-m step; throws if m does not divide finest_n.
  std::int64_t StrideOf(std::int64_t level) const;

 private:
  BrownianTableau() = default;
  void Fill();

  PathSeed seed_{};
  int dimension_ = 1;
  std::int64_t finest_n_ = 1;
  double horizon_ = 0.0;
  std::int64_t steps_ = 0;
  std::vector<double> increments_;
  std::vector<double> values_;
};

// Checks that horizon * n is a (near-exact) integer and returns it.
std::int64_t StepCount(double horizon, std::int64_t n);

}  // namespace emlab
