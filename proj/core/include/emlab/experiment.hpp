#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emlab/error.hpp"

namespace emlab {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { kErrorCurve, kQuadratureW, kQuadratureEm, kZvonkin, kPde, kKernelBlowup };

std::string_view ToString(ExperimentKind kind) noexcept;

struct FitSettings {
  bool include_smallest_level = false;
  bool weighted = false;
};

struct ErrorCurveSettings {
  std::string drift = "sign";
  int dimension = 1;
  double horizon = 1.0;
  std::vector<std::int64_t> levels{16, 32, 64, 128, 256, 512, 1024};
  std::uint64_t path_count = 10000;
  std::int64_t n_ref = 1 << 14;
  int checkpoint_count = 9;
  std::int64_t ref_factor = 16;
  std::string reference = "default";  // default | exact_zero | exact_constant | fine_em
  std::vector<double> x0;             // empty: origin
  bool offset_enabled = false;
  double offset_epsilon = 0.1;
  std::int64_t dump_paths = 0;  // first k paths written per level
};

struct QuadratureSettings {
  std::string functional = "sign_sin";
  std::string drift = "zero";  // quadrature_em only
  int dimension = 1;
  double horizon = 1.0;
  std::vector<std::int64_t> levels{16, 32, 64, 128, 256, 512, 1024};
  std::uint64_t path_count = 10000;
  std::int64_t finest_n = 1 << 14;
  std::optional<double> tau;        // default: the functional's own
  std::optional<double> tau_prime;  // default: min(functional's, T)
  std::vector<double> x0;
};

struct ZvonkinSettings {
  std::string drift = "sign";
  double z = 0.0;
  double table_step = 1e-3;
  double table_radius = 3.0;
  double tolerance_scale = 10.0;
  double inverse_tolerance = 1e-10;
  bool driftless = true;
  std::int64_t driftless_level = 1 << 12;
  double driftless_horizon = 0.25;
  std::uint64_t driftless_paths = 100000;
  double window = 1.0;
  double sigma_threshold = 5.0;
};

struct PdeSettings {
  std::string drift = "sin";
  std::string source = "sign";  // one | sign | gaussian_bump(sigma)
  int dimension = 1;
  std::int64_t points = 2048;
  double half_width = 8.0;
  double horizon = 1.0;
  std::int64_t time_steps = 128;
  int max_iter = 60;
  double tol = 1e-10;
  bool find_horizon = true;  // halve T until the fixed point contracts
  std::int64_t csv_slice_stride = 16;
  std::int64_t csv_node_stride = 8;
};

struct KernelSettings {
  std::int64_t points = 2048;
  double half_width = 8.0;
  std::vector<double> times{0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64};
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kErrorCurve;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path output_dir = "emlab_out";
  FitSettings fit;
  ErrorCurveSettings error_curve;
  QuadratureSettings quadrature;
  ZvonkinSettings zvonkin;
  PdeSettings pde;
  KernelSettings kernel;
};

/// Config validation failure listing every violation.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses and validates; throws ConfigError with all problems at once.
/// Unknown keys are errors.
ExperimentConfig ParseConfig(const Json& document);
ExperimentConfig LoadConfig(const std::filesystem::path& file);

/// Kind-relevant settings with every default made explicit. Excludes the
/// worker count and output directory, which never affect results.
Json EchoConfig(const ExperimentConfig& config);

struct RunOutcome {
  Json document;                           // results.json content
  std::vector<std::string> failed_checks;  // numerical assertions that failed
};

/// Executes the pipeline. With write_outputs, creates output_dir and writes
/// results.json plus the CSV tables of the kind.
RunOutcome Run(const ExperimentConfig& config, bool write_outputs = true);

struct ReproduceVerdict {
  bool identical = false;
  bool version_mismatch = false;
  std::string recorded_version;
  std::vector<std::string> mismatches;  // JSON pointers of differing fields
};

/// Re-executes the config embedded in a results document and compares the
/// results, rate_fits and seed_ledger sections field by field.
ReproduceVerdict Reproduce(const Json& recorded, int workers = 1);

/// JSON pointers where a and b differ (recursive).
std::vector<std::string> DiffJson(const Json& a, const Json& b, const std::string& prefix = "");

}  // namespace emlab
