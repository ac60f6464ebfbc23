#include "emlab/rng_paths.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "emlab/error.hpp"

namespace emlab {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;
constexpr int kPhiloxRounds = 10;

inline void MulHiLo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// Maps 64 random bits to (0, 1].
inline double ToOpenUnit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::Apply(Counter ctr, Key key) noexcept {
  for (int round = 0; round < kPhiloxRounds; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    MulHiLo(kPhiloxM0, ctr[0], hi0, lo0);
    MulHiLo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

NormalStream::NormalStream(PathSeed seed) noexcept : seed_(seed) {}

std::array<double, 2> NormalStream::Pair(std::uint64_t block) const noexcept {
  const Philox4x32::Counter counter = {
      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
      static_cast<std::uint32_t>(seed_.path_index),
      static_cast<std::uint32_t>(seed_.path_index >> 32)};
  const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_.experiment_seed),
                               static_cast<std::uint32_t>(seed_.experiment_seed >> 32)};
  const auto out = Philox4x32::Apply(counter, key);
  const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double radius = std::sqrt(-2.0 * std::log(ToOpenUnit(a)));
  const double angle = 2.0 * std::numbers::pi * ToOpenUnit(b);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double NormalStream::At(std::uint64_t index) const noexcept {
  return Pair(index / 2)[index % 2];
}

void NormalStream::Fill(std::span<double> out, std::uint64_t first_index) const noexcept {
  std::size_t i = 0;
  std::uint64_t index = first_index;
  if (index % 2 == 1 && i < out.size()) {
    out[i++] = Pair(index / 2)[1];
    ++index;
  }
  for (; i + 1 < out.size(); i += 2, index += 2) {
    const auto pair = Pair(index / 2);
    out[i] = pair[0];
    out[i + 1] = pair[1];
  }
  if (i < out.size()) out[i] = Pair(index / 2)[0];
}

bool IsPowerOfTwo(std::int64_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

std::int64_t StepCount(double horizon, std::int64_t n) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidArgument("horizon must be positive and finite, got " + std::to_string(horizon));
  }
  const double exact = horizon * static_cast<double>(n);
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact) || rounded < 1.0) {
    throw InvalidArgument("horizon * n must be a positive integer (horizon=" +
                          std::to_string(horizon) + ", n=" + std::to_string(n) + ")");
  }
  return static_cast<std::int64_t>(rounded);
}

BrownianTableau BrownianTableau::Generate(PathSeed seed, int dimension, std::int64_t finest_n,
                                          double horizon) {
  if (dimension < 1) throw InvalidArgument("dimension must be positive");
  if (!IsPowerOfTwo(finest_n)) {
    throw InvalidArgument("finest_n must be a power of two, got " + std::to_string(finest_n));
  }
  BrownianTableau tableau;
  tableau.seed_ = seed;
  tableau.dimension_ = dimension;
  tableau.finest_n_ = finest_n;
  tableau.horizon_ = horizon;
  tableau.steps_ = StepCount(horizon, finest_n);
  tableau.increments_.resize(static_cast<std::size_t>(tableau.steps_ * dimension));
  tableau.values_.resize(static_cast<std::size_t>((tableau.steps_ + 1) * dimension));
  tableau.Fill();
  return tableau;
}

void BrownianTableau::Regenerate(PathSeed seed) {
  seed_ = seed;
  Fill();
}

void BrownianTableau::Fill() {
  NormalStream(seed_).Fill(increments_);
  const double scale = std::sqrt(1.0 / static_cast<double>(finest_n_));
  for (double& x : increments_) x *= scale;
  const std::size_t d = static_cast<std::size_t>(dimension_);
  for (std::size_t i = 0; i < d; ++i) values_[i] = 0.0;
  for (std::int64_t j = 0; j < steps_; ++j) {
    const double* prev = values_.data() + j * dimension_;
    const double* inc = increments_.data() + j * dimension_;
    double* next = values_.data() + (j + 1) * dimension_;
    for (std::size_t i = 0; i < d; ++i) next[i] = prev[i] + inc[i];
  }
}

std::int64_t BrownianTableau::IndexOf(double t) const {
  const double exact = t * static_cast<double>(finest_n_);
  const double rounded = std::round(exact);
  if (!(t >= 0.0) || std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact) ||
      rounded > static_cast<double>(steps_)) {
    throw InvalidArgument("time " + std::to_string(t) + " is not on the finest grid");
  }
  return static_cast<std::int64_t>(rounded);
}

std::vector<double> BrownianTableau::ValueAt(double t) const {
  const auto w = ValueAtIndex(IndexOf(t));
  return {w.begin(), w.end()};
}

std::int64_t BrownianTableau::StrideOf(std::int64_t level) const {
  if (level < 1 || finest_n_ % level != 0) {
    throw InvalidArgument("level " + std::to_string(level) + " does not divide finest_n " +
                          std::to_string(finest_n_));
  }
  return finest_n_ / level;
}

std::vector<double> BrownianTableau::Aggregate(std::int64_t level) const {
  const std::int64_t stride = StrideOf(level);
  const std::int64_t coarse_steps = steps_ / stride;
  std::vector<double> out(static_cast<std::size_t>(coarse_steps * dimension_), 0.0);
  for (std::int64_t k = 0; k < coarse_steps; ++k) {
    for (int i = 0; i < dimension_; ++i) {
      double sum = 0.0;
      for (std::int64_t j = k * stride; j < (k + 1) * stride; ++j) {
        sum += increments_[j * dimension_ + i];
      }
      out[k * dimension_ + i] = sum;
    }
  }
  return out;
}

}  // namespace emlab
