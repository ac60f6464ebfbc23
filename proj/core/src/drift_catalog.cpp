#include "emlab/drift_catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

#include "emlab/error.hpp"
#include "emlab/rng_paths.hpp"

namespace emlab {
namespace {

struct ParsedName {
  std::string base;
  std::optional<double> argument;
};

ParsedName ParseIdentifier(std::string_view identifier) {
  ParsedName parsed;
  const auto open = identifier.find('(');
  if (open == std::string_view::npos) {
    parsed.base = std::string(identifier);
    return parsed;
  }
  if (identifier.back() != ')') {
    throw InvalidArgument("malformed drift identifier '" + std::string(identifier) + "'");
  }
  parsed.base = std::string(identifier.substr(0, open));
  const std::string arg(identifier.substr(open + 1, identifier.size() - open - 2));
  try {
    std::size_t used = 0;
    parsed.argument = std::stod(arg, &used);
    if (used != arg.size()) throw std::invalid_argument(arg);
  } catch (const std::exception&) {
    throw InvalidArgument("bad numeric argument in drift identifier '" +
                          std::string(identifier) + "'");
  }
  return parsed;
}

std::string FormatNumber(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double Norm(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return std::sqrt(sum);
}

std::vector<double> NoJumps(double, double) { return {}; }

// Jumps of x -> sign(x) restricted to [lo, hi].
std::vector<double> SignJumps(double lo, double hi) {
  if (lo <= 0.0 && 0.0 <= hi) return {0.0};
  return {};
}

// Jumps of the 1-periodic +-1 step: multiples of 1/2.
std::vector<double> HalfIntegerJumps(double lo, double hi) {
  std::vector<double> out;
  for (double k = std::ceil(2.0 * lo); k <= std::floor(2.0 * hi); k += 1.0) {
    out.push_back(k / 2.0);
  }
  return out;
}

constexpr double kDiniLogShift = 3.0;
// 1 / theta(1) for theta = LogSquared(3): scales the profile to sup 1.
constexpr double kDiniLogAmplitude = kDiniLogShift * kDiniLogShift;

}  // namespace

std::string_view ToString(Regularity regularity) noexcept {
  switch (regularity) {
    case Regularity::kLipschitz: return "lipschitz";
    case Regularity::kHolder: return "holder";
    case Regularity::kDini: return "dini";
    case Regularity::kBoundedMeasurable: return "bounded_measurable";
  }
  return "unknown";
}

DiniModulus::DiniModulus(std::string description, LogForm log_form)
    : description_(std::move(description)), log_form_(std::move(log_form)) {}

double DiniModulus::operator()(double r) const {
  if (r <= 0.0) return 0.0;
  return log_form_(-std::log(std::min(r, 1.0)));
}

DiniModulus DiniModulus::Power(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("power modulus needs alpha in (0,1]");
  return DiniModulus("r^" + FormatNumber(alpha),
                     [alpha](double u) { return std::exp(-alpha * u); });
}

DiniModulus DiniModulus::LogSquared(double shift) {
  if (!(shift > 0.0)) throw InvalidArgument("log modulus needs a positive shift");
  return DiniModulus("(" + FormatNumber(shift) + " + log(1/r))^-2", [shift](double u) {
    const double s = shift + u;
    return 1.0 / (s * s);
  });
}

namespace {

struct SimpsonState {
  const std::function<double(double)>* f;
  int evaluations = 0;
};

double Simpson(double a, double fa, double m, double fm, double b, double fb) {
  (void)m;
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double AdaptiveSimpson(SimpsonState& state, double a, double fa, double b, double fb, double m,
                       double fm, double whole, double tolerance, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = (*state.f)(lm);
  const double frm = (*state.f)(rm);
  state.evaluations += 2;
  const double left = Simpson(a, fa, lm, flm, m, fm);
  const double right = Simpson(m, fm, rm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tolerance) {
    return left + right + delta / 15.0;
  }
  return AdaptiveSimpson(state, a, fa, m, fm, lm, flm, left, 0.5 * tolerance, depth - 1) +
         AdaptiveSimpson(state, m, fm, b, fb, rm, frm, right, 0.5 * tolerance, depth - 1);
}

double IntegrateUnitInterval(const std::function<double(double)>& f, double tolerance,
                             int& evaluations) {
  SimpsonState state{&f};
  // Split [0,1) into panels so the recursion starts resolved near w -> 1.
  constexpr int kPanels = 64;
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double a = static_cast<double>(p) / kPanels;
    const double b = static_cast<double>(p + 1) / kPanels;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    state.evaluations += 3;
    total += AdaptiveSimpson(state, a, fa, b, fb, m, fm, Simpson(a, fa, m, fm, b, fb),
                             tolerance / kPanels, 48);
  }
  evaluations = state.evaluations;
  return total;
}

}  // namespace

DiniIntegral ComputeDiniIntegral(const DiniModulus& modulus, double tolerance) {
  // int_0^inf theta(e^-u) du with u = w/(1-w), du = dw/(1-w)^2.
  const std::function<double(double)> integrand = [&modulus](double w) {
    if (w >= 1.0) {
      // Limit of theta(e^-u) u^2 as u -> inf; zero for moduli decaying
      // faster than 1/u^2 and 1 for LogSquared. Use a point just below 1.
      w = std::nextafter(1.0, 0.0);
    }
    const double one_minus = 1.0 - w;
    const double u = w / one_minus;
    return modulus.AtLogScale(u) / (one_minus * one_minus);
  };
  DiniIntegral result;
  int coarse_evals = 0;
  result.coarse_value = IntegrateUnitInterval(integrand, tolerance * 100.0, coarse_evals);
  result.value = IntegrateUnitInterval(integrand, tolerance, result.evaluations);
  if (!std::isfinite(result.value)) {
    throw NumericalFailure("Dini integral diverged for modulus " + modulus.description());
  }
  return result;
}

std::vector<double> DriftSpec::operator()(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(dimension), 0.0);
  evaluate(x, out);
  return out;
}

double DriftSpec::Scalar(double x) const {
  double in[1] = {x};
  double out[1] = {0.0};
  evaluate(std::span<const double>(in, 1), std::span<double>(out, 1));
  return out[0];
}

DriftSpec Builtin(std::string_view identifier, int dimension) {
  if (dimension < 1) throw InvalidArgument("drift dimension must be positive");
  const ParsedName parsed = ParseIdentifier(identifier);
  const auto& base = parsed.base;
  auto no_argument = [&] {
    if (parsed.argument) {
      throw InvalidArgument("drift '" + base + "' takes no argument");
    }
  };

  DriftSpec spec;
  spec.dimension = dimension;
  spec.jumps_1d = NoJumps;

  if (base == "zero") {
    no_argument();
    spec.name = "zero";
    spec.regularity = Regularity::kLipschitz;
    spec.sup_bound = 0.0;
    spec.dini_modulus = DiniModulus::Power(1.0);
    spec.constant_value = std::vector<double>(dimension, 0.0);
    spec.evaluate = [](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    };
    spec.derivation = "b = 0 is trivially Lipschitz with constant 0.";
  } else if (base == "constant") {
    const double c = parsed.argument.value_or(1.0);
    if (!std::isfinite(c)) throw InvalidArgument("constant drift needs a finite value");
    spec.name = "constant(" + FormatNumber(c) + ")";
    spec.regularity = Regularity::kLipschitz;
    spec.sup_bound = std::abs(c);
    spec.dini_modulus = DiniModulus::Power(1.0);
    spec.constant_value = std::vector<double>(dimension, c);
    spec.evaluate = [c](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), c);
    };
    spec.derivation = "b^i = c for every component; differences vanish.";
  } else if (base == "sin") {
    no_argument();
    spec.name = "sin";
    spec.regularity = Regularity::kLipschitz;
    spec.sup_bound = 1.0;
    spec.dini_modulus = DiniModulus::Power(1.0);
    spec.evaluate = [](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(x[i]);
    };
    spec.derivation = "b^i(x) = sin(x_i); |sin a - sin b| <= |a - b| <= |x - y|, |b| <= 1.";
  } else if (base == "holder") {
    const double alpha = parsed.argument.value_or(0.5);
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("holder(alpha) needs alpha in (0,1)");
    spec.name = "holder(" + FormatNumber(alpha) + ")";
    spec.regularity = Regularity::kHolder;
    spec.holder_exponent = alpha;
    spec.sup_bound = 1.0;
    spec.dini_modulus = DiniModulus::Power(alpha);
    spec.evaluate = [alpha](std::span<const double> x, std::span<double> out) {
      const double value = std::min(1.0, std::pow(Norm(x), alpha));
      std::fill(out.begin(), out.end(), value);
    };
    spec.derivation =
        "b^i(x) = min(1, |x|^alpha): ||x|^a - |y|^a| <= ||x| - |y||^a <= |x - y|^a and "
        "truncation at 1 is 1-Lipschitz, so [b^i]_alpha <= 1 and |b| <= 1. Not Lipschitz at 0.";
  } else if (base == "dini_log") {
    no_argument();
    spec.name = "dini_log";
    spec.regularity = Regularity::kDini;
    spec.sup_bound = 1.0;
    spec.dini_modulus = DiniModulus::LogSquared(kDiniLogShift);
    const DiniModulus theta = *spec.dini_modulus;
    spec.evaluate = [theta](std::span<const double> x, std::span<double> out) {
      const double value = kDiniLogAmplitude * theta(std::min(Norm(x), 1.0));
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = (i % 2 == 0) ? value : -value;
    };
    spec.derivation =
        "b^i(x) = +-9 theta(min(|x|,1)), theta(r) = (3 + log(1/r))^-2. theta is increasing "
        "and concave on [0,1] (theta'' has the sign of -log(1/r) for shift 3), so r -> "
        "theta(min(r,1)) is subadditive and |b^i(x) - b^i(y)| <= 9 theta(|x - y|). "
        "int_0^1 theta(r)/r dr = 1/3. theta(r)/r^a -> inf for every a > 0, so b is not Holder "
        "at the origin.";
  } else if (base == "sign") {
    no_argument();
    spec.name = "sign";
    spec.regularity = Regularity::kBoundedMeasurable;
    spec.sup_bound = 1.0;
    spec.evaluate = [](std::span<const double> x, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      out[0] = x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
    };
    spec.jumps_1d = SignJumps;
    spec.derivation = "b(x) = sign(x_1) e_1 with sign(0) := 0; bounded, jump at x_1 = 0.";
  } else if (base == "step_grid") {
    no_argument();
    spec.name = "step_grid";
    spec.regularity = Regularity::kBoundedMeasurable;
    spec.sup_bound = 1.0;
    spec.evaluate = [](std::span<const double> x, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      const double frac = x[0] - std::floor(x[0]);
      out[0] = frac < 0.5 ? 1.0 : -1.0;
    };
    spec.jumps_1d = HalfIntegerJumps;
    spec.derivation =
        "b(x) = e_1 (+1 on [k, k+1/2), -1 on [k+1/2, k+1)); bounded, jumps at every half "
        "integer.";
  } else {
    throw InvalidArgument("unknown drift '" + std::string(identifier) + "'");
  }
  return spec;
}

std::vector<BuiltinInfo> ListBuiltins() {
  return {
      {"zero", "lipschitz", "b(x) = 0"},
      {"constant(c)", "lipschitz", "b^i(x) = c"},
      {"sin", "lipschitz", "b^i(x) = sin(x_i)"},
      {"holder(alpha)", "holder(alpha)", "b^i(x) = min(1, |x|^alpha)"},
      {"dini_log", "dini((3 + log(1/r))^-2)", "b^i(x) = +-9 (3 + log(1/min(|x|,1)))^-2"},
      {"sign", "bounded_measurable", "b(x) = sign(x_1) e_1, sign(0) = 0"},
      {"step_grid", "bounded_measurable", "b(x) = e_1 (+1 if frac(x_1) < 1/2 else -1)"},
  };
}

double DiniSeminormEstimate(const DriftSpec& spec, std::int64_t sample_count,
                            std::uint64_t seed) {
  if (!spec.dini_modulus) {
    throw InvalidArgument("drift '" + spec.name + "' has no Dini modulus");
  }
  if (sample_count < 1) throw InvalidArgument("sample_count must be positive");
  const DiniModulus& theta = *spec.dini_modulus;
  const auto d = static_cast<std::size_t>(spec.dimension);
  constexpr double kBox = 3.0;
  constexpr double kMinLogSeparation = -18.0 * std::numbers::ln10;  // r >= 1e-18

  std::vector<double> sup(d, 0.0), ratio(d, 0.0);
  std::vector<double> x(d), y(d), bx(d), by(d), direction(d);
  const NormalStream stream(PathSeed{seed, 0});
  std::uint64_t index = 0;
  auto uniform = [&] {
    // Map a standard normal through its CDF to (0,1).
    return 0.5 * std::erfc(-stream.At(index++) / std::numbers::sqrt2);
  };

  for (std::int64_t s = 0; s < sample_count; ++s) {
    for (auto& xi : x) xi = kBox * (2.0 * uniform() - 1.0);
    double norm = 0.0;
    for (auto& v : direction) {
      v = stream.At(index++);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    // Log-uniform separation in [1e-18, 1] to probe small scales.
    const double r = std::exp(kMinLogSeparation * uniform());
    for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + r * direction[i] / norm;
    spec.evaluate(x, bx);
    spec.evaluate(y, by);
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
    dist = std::sqrt(dist);
    const double denominator = theta(std::min(dist, 1.0));
    for (std::size_t i = 0; i < d; ++i) {
      sup[i] = std::max({sup[i], std::abs(bx[i]), std::abs(by[i])});
      if (dist > 0.0 && denominator > 0.0) {
        ratio[i] = std::max(ratio[i], std::abs(bx[i] - by[i]) / denominator);
      }
    }
  }
  double best = 0.0;
  for (std::size_t i = 0; i < d; ++i) best = std::max(best, sup[i] + ratio[i]);
  return best;
}

}  // namespace emlab
