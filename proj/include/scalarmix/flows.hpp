#pragma once

// Divergence-free velocity fields with finite Fourier support.

#include "scalarmix/fourier.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace scalarmix {

class FlowError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FlowKind { Shear, Cellular, Custom };

std::string to_string(FlowKind kind);

/// u(y) = sum_{j=1..M} cos_coeffs[j-1] cos(j y) + sin_coeffs[j-1] sin(j y).
struct ShearProfile {
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;

  int max_wavenumber() const;
  bool is_zero() const;
  double value(double y) const;
  double derivative(double y) const;
};

/// Complex Fourier amplitude of the velocity at one lattice mode.
struct VelocityMode {
  ModeIndex mode;
  std::complex<double> ux;
  std::complex<double> uy;
};

class Flow {
 public:
  FlowKind kind() const { return kind_; }
  const std::optional<ShearProfile>& profile() const { return profile_; }
  const std::optional<FourierField>& streamfunction() const { return streamfunction_; }

  /// Exact expansion u(x) = sum_q u_q e^{i q.x} over the full lattice (both q and -q).
  const std::vector<VelocityMode>& velocity() const { return velocity_; }
  int max_wavenumber() const { return max_wavenumber_; }
  /// sum_q |q| |u_q|, an upper bound for the Lipschitz constant of u.
  double lipschitz_bound() const { return lipschitz_bound_; }
  /// Shear only: sign changes of u' found on a uniform 10^4-point grid.
  int shear_derivative_zeros() const { return derivative_zeros_; }
  bool nondegenerate() const { return nondegenerate_; }

  /// Pointwise velocity.
  std::pair<double, double> evaluate(double x, double y) const;

  friend Flow make_shear(const ShearProfile& profile);
  friend Flow make_cellular(const FourierField& streamfunction);
  friend Flow make_custom(const FourierField& streamfunction);

 private:
  Flow() = default;
  void finish();

  FlowKind kind_ = FlowKind::Custom;
  std::optional<ShearProfile> profile_;
  std::optional<FourierField> streamfunction_;
  std::vector<VelocityMode> velocity_;
  int max_wavenumber_ = 0;
  double lipschitz_bound_ = 0.0;
  int derivative_zeros_ = 0;
  bool nondegenerate_ = false;
};

Flow make_shear(const ShearProfile& profile);
/// u = grad^perp psi = (-d_y psi, d_x psi).
Flow make_cellular(const FourierField& streamfunction);
Flow make_custom(const FourierField& streamfunction);

/// psi = sin x sin y.
FourierField default_cellular_streamfunction();
Flow default_cellular_flow();

std::vector<VelocityMode> velocity_coefficients(const Flow& flow);

/// max_q |q1 u_q,x + q2 u_q,y|; zero for every constructible flow.
double spectral_divergence(const Flow& flow);

/// Streamfunction on the uniform M x M grid. Shear flows have no periodic
/// streamfunction and are rejected.
Eigen::MatrixXd streamfunction_grid(const Flow& flow, Index grid);

std::string describe(const Flow& flow);

}  // namespace scalarmix
