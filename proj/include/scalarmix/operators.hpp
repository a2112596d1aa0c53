#pragma once

// Galerkin matrices of u.grad, (fractional) dissipation and the viscous
// generator on the canonical real Fourier basis, and the semigroups they
// generate.
//
// Sign conventions: the advection matrix represents u.grad itself, the
// dissipation matrix represents -(-Delta)^s, and the generator is
//     A = -advection + nu * dissipation,
// so that df/dt = A f is the deterministic passive-scalar equation.

#include "scalarmix/flows.hpp"
#include "scalarmix/fourier.hpp"

#include <iosfwd>
#include <vector>

namespace scalarmix {

class OperatorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OperatorKind { Advection, Dissipation, Generator };

/// Index sets of the connected components of the coupling graph of a matrix
/// (i ~ j when entry (i,j) or (j,i) is nonzero). The matrix is block diagonal
/// in this partition, so exponentials, eigendecompositions and Lyapunov
/// solves decouple across blocks.
using BlockPartition = std::vector<std::vector<Index>>;

BlockPartition coupling_blocks(const Eigen::MatrixXd& m);

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Index>& rows,
                       const std::vector<Index>& cols);
Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Index>& rows);

class OperatorMatrix {
 public:
  OperatorMatrix(OperatorKind kind, int truncation, double nu, double s, Eigen::MatrixXd entries);

  OperatorKind kind() const { return kind_; }
  int truncation() const { return truncation_; }
  double nu() const { return nu_; }
  double order() const { return s_; }
  const Eigen::MatrixXd& entries() const { return entries_; }
  Index dimension() const { return entries_.rows(); }
  const BlockPartition& blocks() const { return blocks_; }

 private:
  OperatorKind kind_;
  int truncation_;
  double nu_;
  double s_;
  Eigen::MatrixXd entries_;
  BlockPartition blocks_;
};

/// B[l, m] = <basis_l, u.grad basis_m>, by exact convolution of the finite
/// velocity series. Modes advected beyond the truncation are dropped.
OperatorMatrix advection_matrix(const Flow& flow, int truncation);

/// Diagonal -(k1^2 + k2^2)^s.
OperatorMatrix dissipation_matrix(int truncation, double s = 1.0);

/// A = -advection + nu * dissipation.
OperatorMatrix generator(const Flow& flow, double nu, int truncation, double s = 1.0);

struct ExpmOptions {
  /// Blocks up to this size use dense scaling-and-squaring.
  Index dense_cap = 4000;
  /// Relative tolerance of the Krylov evaluation used above dense_cap.
  double krylov_tolerance = 1e-10;
};

/// exp(t A) f. Negative t is allowed only for nu == 0.
FourierField semigroup_apply(const OperatorMatrix& a, double t, const FourierField& f,
                             const ExpmOptions& options = {});

/// ||exp(t A)||_{L2 -> L2}, the largest singular value.
double semigroup_norm(const OperatorMatrix& a, double t, const ExpmOptions& options = {});

/// Fixed-step propagator exp(h A), factored per coupling block.
class StepPropagator {
 public:
  StepPropagator(const OperatorMatrix& a, double step, const ExpmOptions& options = {});

  double step() const { return step_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Columnwise application to a dim x r block.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;
  /// Dense exp(h A) (assembled from blocks).
  Eigen::MatrixXd matrix() const;

 private:
  struct Block {
    std::vector<Index> indices;
    Eigen::MatrixXd dense;
    Eigen::MatrixXd generator;  // kept only when the block exceeds dense_cap
  };
  Index dimension_;
  double step_;
  ExpmOptions options_;
  std::vector<Block> blocks_;
};

/// Plain triplet text export "row col value" (nonzero entries).
void write_triplets(std::ostream& out, const OperatorMatrix& a);

std::string to_string(OperatorKind kind);

}  // namespace scalarmix
