#pragma once

// Truncated real Fourier representation of mean-zero scalar fields on the
// 2-torus [0, 2pi]^2.
//
// Basis. For every half-lattice representative k = (k1, k2), i.e. k1 > 0, or
// k1 == 0 and k2 > 0, with max(|k1|, |k2|) <= N, there are two L2-orthonormal
// basis functions
//
//     c_k(x) = sqrt(2)/(2 pi) cos(k.x),    s_k(x) = sqrt(2)/(2 pi) sin(k.x).
//
// Canonical ordering. Half-lattice modes are enumerated as
//     (0,1), (0,2), ..., (0,N),
//     (1,-N), ..., (1,N), (2,-N), ..., (N,N)
// and mode m occupies coefficient slots 2m (cosine) and 2m+1 (sine). The
// coefficient vector therefore has length (2N+1)^2 - 1.
//
// Complex convention used internally: a field with cosine/sine coefficients
// (a, b) on mode k has complex amplitude z_k = (a - i b)/2 and
// z_{-k} = conj(z_k), so that f = basis_scale() * sum_k z_k e^{i k.x}.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scalarmix {

using Index = Eigen::Index;

class FieldError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Parity : std::uint8_t { Cos = 0, Sin = 1 };

char parity_tag(Parity p);
Parity parse_parity(const std::string& tag);

struct ModeIndex {
  int k1 = 0;
  int k2 = 0;

  friend bool operator==(const ModeIndex&, const ModeIndex&) = default;

  int wavenumber2() const { return k1 * k1 + k2 * k2; }
  int sup_norm() const;
  // k1 > 0, or k1 == 0 and k2 > 0.
  bool is_canonical() const { return k1 > 0 || (k1 == 0 && k2 > 0); }
};

/// Amplitude sqrt(2)/(2 pi) of the orthonormal cosine/sine basis functions.
double basis_scale();

/// Number of real coefficients at truncation N: (2N+1)^2 - 1.
Index basis_dimension(int truncation);

/// Index bookkeeping for the canonical coefficient ordering at truncation N.
class Basis {
 public:
  explicit Basis(int truncation);

  int truncation() const { return truncation_; }
  Index dimension() const { return 2 * static_cast<Index>(modes_.size()); }
  Index mode_count() const { return static_cast<Index>(modes_.size()); }

  const ModeIndex& mode(Index coefficient) const { return modes_[coefficient / 2]; }
  Parity parity(Index coefficient) const {
    return coefficient % 2 == 0 ? Parity::Cos : Parity::Sin;
  }
  int wavenumber2(Index coefficient) const { return mode(coefficient).wavenumber2(); }

  bool contains(const ModeIndex& k) const;
  /// Slot of a canonical mode; throws for (0,0), non-canonical or out-of-range modes.
  Index index(const ModeIndex& k, Parity p) const;

  /// |k|^2 per coefficient.
  Eigen::VectorXd wavenumbers2() const;

 private:
  int truncation_;
  std::vector<ModeIndex> modes_;
};

struct FieldEntry {
  ModeIndex mode;
  Parity parity = Parity::Cos;
  double amplitude = 0.0;
};

class FourierField {
 public:
  /// Zero field.
  explicit FourierField(int truncation);
  FourierField(int truncation, Eigen::VectorXd coefficients);

  int truncation() const { return truncation_; }
  Index dimension() const { return coeffs_.size(); }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  double coefficient(const ModeIndex& k, Parity p) const;

  double l2_norm() const { return coeffs_.norm(); }
  bool is_zero() const { return coeffs_.isZero(0.0); }

 private:
  int truncation_;
  Eigen::VectorXd coeffs_;
};

/// Builds a field from orthonormal-basis amplitudes. A non-canonical mode -k is
/// folded onto k (the sine amplitude flips sign). Duplicate (mode, parity)
/// entries, the (0,0) mode and modes outside the truncation are rejected.
FourierField make_field(int truncation, std::span<const FieldEntry> entries);

/// Same as make_field, but amplitudes multiply the plain trigonometric
/// functions cos(k.x), sin(k.x) instead of the orthonormal basis.
FourierField make_trig_field(int truncation, std::span<const FieldEntry> entries);

/// Embeds (zero-padding) or truncates to another truncation order.
FourierField resize(const FourierField& f, int truncation);

double inner_product(const FourierField& f, const FourierField& g);

/// ||(-Delta)^{s/2} f||_{L2}.
double sobolev_norm(const FourierField& f, double s);

/// Keeps the modes with max(|k1|, |k2|) <= order.
FourierField project_low(const FourierField& f, int order);

/// Keeps the modes with |k|^2 <= max_wavenumber2.
FourierField project_wavenumber2(const FourierField& f, double max_wavenumber2);

/// Laplacian eigenvalue of the count-th basis function (1-based) when basis
/// functions are sorted by |k|^2, ties broken on (|k1|, |k2|, parity).
int laplacian_eigenvalue(int truncation, Index count);

/// Eigenvalue-count projection P_{<= count}: keeps |k|^2 <= lambda_count.
FourierField project_eigen_count(const FourierField& f, Index count);

/// Point values on the uniform grid (2 pi i/M, 2 pi j/M); entry (i, j) is
/// the value at x = 2 pi i/M, y = 2 pi j/M. Requires M >= 2N+2.
Eigen::MatrixXd sample_grid(const FourierField& f, Index grid);

/// Discrete L2 projection of grid values onto the truncation-N basis.
/// Exact inverse of sample_grid for band-limited data.
FourierField analyze_grid(const Eigen::MatrixXd& values, int truncation);

/// Full-lattice complex amplitudes z_k, stored at (k1 + N, k2 + N).
Eigen::MatrixXcd complex_amplitudes(const FourierField& f);
FourierField from_complex_amplitudes(const Eigen::MatrixXcd& amplitudes, int truncation);

// Text format:
//   # scalarmix field v1
//   N <truncation>
//   <k1> <k2> <c|s> <amplitude>     one line per coefficient, canonical order
// Amplitudes use 17 significant digits, which round-trips doubles exactly.
void write_field(std::ostream& out, const FourierField& f);
FourierField read_field(std::istream& in);

/// 17-significant-digit decimal rendering shared by all text outputs.
std::string format_double(double value);

}  // namespace scalarmix
