#pragma once

// Spectral diagnostics of the advection operator L = i u.grad: full
// eigendecomposition of the truncated matrix, flow-specific projections onto
// the span E of H1 eigenfunctions, inviscid H1 growth averages, low-mode
// time averages, and the exact characteristic solution for shear flows.

#include "scalarmix/flows.hpp"
#include "scalarmix/fourier.hpp"
#include "scalarmix/operators.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace scalarmix {

struct SpectrumReport {
  int truncation = 0;
  /// lambda with B v = i lambda v, ascending.
  Eigen::VectorXd frequencies;
  /// Orthonormal eigenvectors, column j belongs to frequencies[j].
  Eigen::MatrixXcd eigenvectors;
  Index kernel_dimension = 0;
  /// max_j |Re(v_j^* B v_j)|, the real part of each eigenvalue estimate.
  double max_real_part = 0.0;
  /// max_j ||B v_j - i lambda_j v_j||.
  double max_residual = 0.0;
};

/// Eigendecomposition of an advection matrix through the Hermitian matrix i B.
/// Frequencies with |lambda| <= kernel_tolerance * ||B||_max count as kernel.
SpectrumReport spectrum(const OperatorMatrix& advection, double kernel_tolerance = 1e-10);

/// Shear flows: x-average, i.e. keep only k1 == 0.
FourierField shear_E_projection(const FourierField& f);

struct StreamlineProjection {
  FourierField field;
  /// ||P(P f) - P f|| / ||P f|| (0 when P f = 0).
  double idempotence_deviation = 0.0;
};

/// Conditional average of f on level sets of the streamfunction: grid points
/// are grouped into `bins` equal-count bins by streamfunction value, f is
/// replaced by its bin mean, and the result is projected back to truncation N.
StreamlineProjection streamline_projection(const Flow& flow, const FourierField& f, int bins,
                                           Index grid);

enum class GrowthMethod { TruncatedExponential, ShearExact };

std::string to_string(GrowthMethod method);

struct GrowthCurve {
  std::vector<double> times;
  std::vector<double> values;
  /// Trapezoid step used for each time.
  std::vector<double> steps;
  GrowthMethod method = GrowthMethod::TruncatedExponential;
  std::string flow;
  double initial_h1_norm2 = 0.0;
};

/// G(T) = (1/T) int_0^T ||S(t) f0||_{H1}^2 dt for the inviscid group, by
/// the trapezoid rule with step at most max_step (default T/1000 per T).
GrowthCurve h1_growth_average(const Flow& flow, const FourierField& f0, const std::vector<double>& times,
                              GrowthMethod method, double max_step = 0.0);

/// y-grid size resolving e^{-i k1 u(y) t} for |k1| <= N to double precision.
Index shear_required_grid(const ShearProfile& profile, int truncation, double t);

/// S(t) f0 for u = (u(y), 0): each x-Fourier component is multiplied by
/// e^{-i k1 u(y) t} on a uniform y-grid and transformed back to truncation N.
/// ygrid == 0 picks max(8N, shear_required_grid).
FourierField shear_exact_evolution(const ShearProfile& profile, const FourierField& f0, double t,
                                   Index ygrid = 0);

/// ||S(t) f0||_{H1}^2 computed on the y-grid without truncating the result
/// (the y-derivative is taken analytically).
double shear_exact_h1_norm2(const ShearProfile& profile, const FourierField& f0, double t,
                            Index ygrid = 0);

struct LowModeOptions {
  /// |k|^2 cutoff of the low-mode projection.
  double max_wavenumber2 = 4.0;
  /// Trapezoid step; 0 means min(T/1000, 0.01).
  double step = 0.0;
  /// Streamline projection parameters (cellular/custom flows).
  int bins = 64;
  Index grid = 256;
};

/// (1/T) int_0^T ||P_low S(t) (I - Pi_e) f0||^2 dt. Pi_e is the x-average
/// for shear flows (evolved exactly) and the streamline projection otherwise
/// (evolved with the truncated exponential).
double low_mode_time_average(const Flow& flow, const FourierField& f0, double horizon,
                             const LowModeOptions& options = {});

/// CSV "T,G" with 17 significant digits.
void write_growth_csv(std::ostream& out, const GrowthCurve& curve);
/// CSV "index,lambda".
void write_spectrum_csv(std::ostream& out, const SpectrumReport& report);

}  // namespace scalarmix
