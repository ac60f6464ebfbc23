#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emlab {

enum class Regularity { kLipschitz, kHolder, kDini, kBoundedMeasurable };

std::string_view ToString(Regularity regularity) noexcept;

/// Continuous increasing modulus theta: [0,1] -> [0, inf) with theta(0) = 0.
/// Stored in logarithmic form u -> theta(exp(-u)) so that the Dini integral
/// int_0^1 theta(r)/r dr = int_0^inf theta(exp(-u)) du can be evaluated
/// without underflow.
class DiniModulus {
 public:
  using LogForm = std::function<double(double)>;

  DiniModulus(std::string description, LogForm log_form);

  // theta(r) for r in [0, 1].
  double operator()(double r) const;
  double AtLogScale(double u) const { return log_form_(u); }
  const std::string& description() const noexcept { return description_; }

  // theta(r) = r^alpha.
  static DiniModulus Power(double alpha);
  // theta(r) = (shift + log(1/r))^-2. Concave on [0,1] when shift >= 3.
  static DiniModulus LogSquared(double shift);

 private:
  std::string description_;
  LogForm log_form_;
};

struct DiniIntegral {
  double value = 0.0;
  double coarse_value = 0.0;  // same quadrature at 100x looser tolerance
  int evaluations = 0;
};

// Adaptive Simpson on int_0^inf theta(exp(-u)) du after the map
// u = w / (1 - w), w in [0, 1).
DiniIntegral ComputeDiniIntegral(const DiniModulus& modulus, double tolerance = 1e-10);

using DriftFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

/// A drift b: R^d -> R^d with its declared regularity. Immutable and
/// shareable across threads.
struct DriftSpec {
  std::string name;  // canonical identifier, e.g. "holder(0.25)"
  int dimension = 1;
  Regularity regularity = Regularity::kLipschitz;
  double holder_exponent = 1.0;  // meaningful for kHolder
  double sup_bound = 0.0;        // >= sup_x max_i |b^i(x)|
  std::optional<DiniModulus> dini_modulus;
  DriftFunction evaluate;
  // Set when b is constant; enables closed-form reference solutions.
  std::optional<std::vector<double>> constant_value;
  // Jump points of b^1 along x_1 inside [lo, hi] (d = 1 transforms).
  std::function<std::vector<double>(double lo, double hi)> jumps_1d;
  std::string derivation;  // why the declared class is correct

  std::vector<double> operator()(std::span<const double> x) const;
  double Scalar(double x) const;  // b^1 at x for d = 1
};

/// Builds a builtin drift from an identifier:
///   zero | constant(c) | sin | holder(alpha) | dini_log | sign | step_grid
/// Throws InvalidArgument on unknown names or bad parameters.
DriftSpec Builtin(std::string_view identifier, int dimension);

struct BuiltinInfo {
  std::string identifier;
  std::string regularity;
  std::string formula;
};
std::vector<BuiltinInfo> ListBuiltins();

/// Empirical lower bound on ||b||_D: max over sampled points of |b^i| plus
/// max over sampled pairs |x - y| <= 1 of |b^i(x) - b^i(y)| / theta(|x - y|),
/// maximised over components. Throws InvalidArgument without a modulus.
double DiniSeminormEstimate(const DriftSpec& spec, std::int64_t sample_count,
                            std::uint64_t seed = 0x5eed);

}  // namespace emlab
