#pragma once

// Config-driven experiment runner shared by the command-line tool and tests.

#include "scalarmix/covariance.hpp"
#include "scalarmix/flows.hpp"
#include "scalarmix/fourier.hpp"
#include "scalarmix/spde.hpp"
#include "scalarmix/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scalarmix {

enum class ExperimentKind { CovarianceLadder, Simulate, Spectrum, Growth, DissipationProbe, CellularSupport };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(const std::string& name);

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Spectrum;
  int truncation = 0;
  Flow flow = default_cellular_flow();
  /// Single value for simulate; the ladder otherwise.
  std::vector<double> nu;
  double order = 1.0;
  std::optional<NoiseSpec> noise;
  std::uint64_t seed = 0;

  // simulate
  Scheme scheme = Scheme::ExactGaussian;
  double dt = 0.1;
  double horizon = 1.0;
  std::optional<double> burn_in;
  Index members = 1;
  Index sample_every = 1;
  Index record_every = 1;

  // growth
  std::vector<double> times;
  GrowthMethod method = GrowthMethod::TruncatedExponential;
  double max_step = 0.0;
  std::vector<double> low_mode_horizons;
  double low_mode_wavenumber2 = 4.0;

  // dissipation-probe
  double tau = 1.0;

  // cellular-support and streamline projections
  int bins = 64;
  Index grid = 256;

  std::optional<FourierField> initial;
  /// The parsed config, with defaults filled in; written into the manifest.
  nlohmann::ordered_json normalized;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::optional<ExperimentKind> kind;
  Index dimension = 0;
  double memory_bytes = 0.0;
  std::string runtime_class;

  bool ok() const { return errors.empty(); }
  std::string format() const;
};

/// JSON with // and /* */ comments allowed.
nlohmann::json load_config(const std::filesystem::path& path);

/// Full validation; never throws on bad content.
ValidationReport validate_config(const nlohmann::json& config);

/// Throws ConfigError listing every violated field.
ExperimentSpec parse_spec(const nlohmann::json& config);

/// Dense Lyapunov / matrix exponential cap on a single coupling block.
inline constexpr Index kDenseCap = 4000;

struct RunResult {
  std::vector<std::filesystem::path> files;
};

/// Runs the experiment and writes result files, manifest.json and
/// run_info.json (timestamps) into `out`.
RunResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out, int threads);

/// Least-squares fit of log y = log c + p log x over positive pairs; returns (p, c).
std::pair<double, double> power_law_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace scalarmix
