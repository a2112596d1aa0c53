#pragma once

// Stationary covariances of the forced passive-scalar system
//     df = A f dt + sqrt(nu) Psi dW,      A = -u.grad + nu Delta,
// on the truncated real Fourier basis. The noise acts independently on each
// basis coefficient with amplitude psi_i, so Psi Psi^T = diag(psi^2).

#include "scalarmix/fourier.hpp"
#include "scalarmix/operators.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>

namespace scalarmix {

class NoiseSpec {
 public:
  NoiseSpec(int truncation, Eigen::VectorXd amplitudes);

  int truncation() const { return truncation_; }
  const Eigen::VectorXd& amplitudes() const { return amplitudes_; }
  /// ||Psi||^2 = sum psi_i^2.
  double intensity() const { return amplitudes_.squaredNorm(); }
  std::vector<Index> forced_indices() const;

 private:
  int truncation_;
  Eigen::VectorXd amplitudes_;
};

/// Forcing amplitudes on orthonormal basis coefficients; same folding and
/// validation rules as make_field.
NoiseSpec make_noise(int truncation, std::span<const FieldEntry> entries);

enum class CovarianceSource { Lyapunov, Quadrature, ShearLimit, Empirical, File };

std::string to_string(CovarianceSource source);

struct CovarianceProvenance {
  CovarianceSource source = CovarianceSource::Lyapunov;
  double nu = std::numeric_limits<double>::quiet_NaN();
  double horizon = std::numeric_limits<double>::quiet_NaN();
  double step = std::numeric_limits<double>::quiet_NaN();
  Index samples = 0;
  /// Lyapunov: ||A Q + Q A^T + nu Psi Psi^T||_F.
  double residual = std::numeric_limits<double>::quiet_NaN();

  std::string describe() const;
};

class CovarianceOperator {
 public:
  CovarianceOperator(int truncation, Eigen::MatrixXd matrix, CovarianceProvenance provenance);

  int truncation() const { return truncation_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const CovarianceProvenance& provenance() const { return provenance_; }
  Index dimension() const { return matrix_.rows(); }

  double min_eigenvalue() const;
  double operator_norm() const;

 private:
  int truncation_;
  Eigen::MatrixXd matrix_;
  CovarianceProvenance provenance_;
};

/// Q_nu solving A Q + Q A^T + nu Psi Psi^T = 0 by a Schur-based dense solve on
/// each coupling block of A. Requires a generator with nu > 0. Throws
/// SolverError (carrying the residual) when the residual certificate
///     ||A Q + Q A^T + nu Psi Psi^T||_F <= 1e-10 (||A||_F ||Q||_F + nu ||Psi||^2)
/// cannot be met after one refinement step.
CovarianceOperator lyapunov_covariance(const OperatorMatrix& a, const NoiseSpec& noise,
                                       Index dense_cap = 4000);

struct QuadratureCovariance {
  CovarianceOperator covariance;
  /// Bound on the neglected tail nu int_T^inf: e^{-2 nu T} nu ||Psi||^2 / (2 nu).
  double tail_estimate;
};

/// nu int_0^T e^{tA} Psi Psi^T e^{tA^T} dt by the trapezoid rule with the
/// Euler-Maclaurin endpoint correction -h^2/12 (F'(T) - F'(0)), where
/// F' = A F + F A^T is available exactly.
QuadratureCovariance covariance_by_quadrature(const OperatorMatrix& a, const NoiseSpec& noise, double horizon,
                                              double step);

/// Inviscid limit for non-degenerate shear flows: psi^2/(2 j^2) on each
/// k1 = 0 coefficient with wavenumber (0, j), zero elsewhere.
CovarianceOperator shear_limit_covariance(const NoiseSpec& noise);

/// tr(Lambda Q) with Lambda = diag(|k|^2).
double h1_trace(const CovarianceOperator& q);

using ModeSelector = std::function<bool(const ModeIndex&, Parity)>;

ModeSelector select_all();
ModeSelector select_k1_zero();
ModeSelector select_k1_nonzero();

/// Largest singular value of the principal submatrix on the selected modes.
double block_operator_norm(const CovarianceOperator& q, const ModeSelector& selector);

/// ||Q1 - Q2||_{L2 -> L2}.
double covariance_distance(const CovarianceOperator& q1, const CovarianceOperator& q2);

// Text format:
//   # scalarmix covariance v1
//   N <truncation>
//   dim <dimension>
//   provenance <source> nu=<..> T=<..> h=<..> samples=<..> residual=<..>
//   <dim lines of dim row-major values>
void write_covariance(std::ostream& out, const CovarianceOperator& q);
CovarianceOperator read_covariance(std::istream& in);

/// CSV "index,eigenvalue", eigenvalues in descending order.
void write_eigen_summary_csv(std::ostream& out, const CovarianceOperator& q);

}  // namespace scalarmix
