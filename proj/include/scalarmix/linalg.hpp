#pragma once

// Dense matrix kernels shared by the operator and covariance layers: matrix
// exponential (dense and Krylov action), spectral norms and the continuous
// Lyapunov solver. All are templated on the Eigen scalar type.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace scalarmix {

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// exp(t M) by Pade scaling-and-squaring.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> dense_expm(const Eigen::MatrixBase<Derived>& m,
                                                 typename Derived::Scalar t) {
  const DenseMatrix<typename Derived::Scalar> scaled = t * m;
  return scaled.exp();
}

/// Largest singular value of a real matrix, from the top eigenvalue of M^T M.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  const DenseMatrix<Scalar> gram =
      m.rows() >= m.cols() ? DenseMatrix<Scalar>(m.transpose() * m) : DenseMatrix<Scalar>(m * m.transpose());
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(Scalar(0), eig.eigenvalues().maxCoeff()));
}

/// Spectral norm of a symmetric matrix: max |eigenvalue|.
template <typename Derived>
typename Derived::Scalar symmetric_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  const DenseMatrix<Scalar> sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// exp(t M) v by restarted Arnoldi with substep control. Each substep is
/// accepted when its error estimate is below tolerance * ||v|| * tau / |t|.
template <typename Derived>
DenseVector<typename Derived::Scalar> expm_multiply(const Eigen::MatrixBase<Derived>& m,
                                                    typename Derived::Scalar t,
                                                    DenseVector<typename Derived::Scalar> v,
                                                    typename Derived::Scalar tolerance,
                                                    int krylov_dim = 30) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = m.rows();
  if (n == 0 || t == Scalar(0)) return v;
  const Scalar sign = t < 0 ? Scalar(-1) : Scalar(1);
  const Scalar horizon = std::abs(t);
  const Scalar anorm = m.cwiseAbs().colwise().sum().maxCoeff();
  if (anorm == Scalar(0)) return v;
  const int dim = static_cast<int>(std::min<Eigen::Index>(krylov_dim, n));
  Scalar done = 0;
  Scalar tau = std::min(horizon, Scalar(0.5) * dim / anorm);

  DenseMatrix<Scalar> basis(n, dim + 1);
  DenseMatrix<Scalar> hess(dim + 1, dim);
  while (done < horizon) {
    const Scalar beta = v.norm();
    if (beta == Scalar(0)) return v;
    basis.setZero();
    hess.setZero();
    basis.col(0) = v / beta;
    int used = dim;
    Scalar breakdown = 0;
    for (int j = 0; j < dim; ++j) {
      DenseVector<Scalar> w = sign * (m * basis.col(j));
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(w);
        w -= hess(i, j) * basis.col(i);
      }
      // second Gram-Schmidt pass
      for (int i = 0; i <= j; ++i) {
        const Scalar c = basis.col(i).dot(w);
        hess(i, j) += c;
        w -= c * basis.col(i);
      }
      const Scalar h = w.norm();
      hess(j + 1, j) = h;
      if (h <= Scalar(1e-14) * anorm) {
        used = j + 1;
        breakdown = h;
        break;
      }
      basis.col(j + 1) = w / h;
    }
    const bool happy = used < dim || breakdown != Scalar(0);
    for (;;) {
      tau = std::min(tau, horizon - done);
      const DenseMatrix<Scalar> small = dense_expm(hess.topLeftCorner(used, used), tau);
      const Scalar err = happy ? Scalar(0)
                               : beta * tau * hess(used, used - 1) * std::abs(small(used - 1, 0));
      if (err <= tolerance * beta * std::max(tau / horizon, Scalar(1e-3)) || tau < horizon * Scalar(1e-12)) {
        v = beta * (basis.leftCols(used) * small.col(0));
        done += tau;
        if (err < Scalar(0.1) * tolerance * beta * tau / horizon) tau *= Scalar(2);
        break;
      }
      tau *= Scalar(0.5);
    }
  }
  return v;
}

/// Solves A X + X A^T + C = 0 for real A by complex Schur reduction followed
/// by column-wise back substitution (Bartels-Stewart). Requires
/// lambda_i(A) + conj(lambda_j(A)) != 0 for all i, j.
template <typename DerivedA, typename DerivedC>
DenseMatrix<typename DerivedA::Scalar> solve_continuous_lyapunov(const Eigen::MatrixBase<DerivedA>& a,
                                                                 const Eigen::MatrixBase<DerivedC>& c) {
  using Real = typename DerivedA::Scalar;
  using Complex = std::complex<Real>;
  using CMatrix = DenseMatrix<Complex>;
  const Eigen::Index n = a.rows();
  if (a.cols() != n || c.rows() != n || c.cols() != n)
    throw std::invalid_argument("lyapunov: dimension mismatch");
  if (n == 0) return DenseMatrix<Real>(0, 0);

  Eigen::ComplexSchur<DenseMatrix<Real>> schur(a.derived(), true);
  if (schur.info() != Eigen::Success)
    throw SolverError("lyapunov: Schur decomposition did not converge", std::numeric_limits<double>::infinity());
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();

  // T Y + Y T^* = F with F = -U^* C U
  const CMatrix f = -(u.adjoint() * c.template cast<Complex>() * u);
  CMatrix y = CMatrix::Zero(n, n);
  CMatrix shifted = t;
  const Real scale = t.cwiseAbs().maxCoeff();
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    DenseVector<Complex> rhs = f.col(k);
    const Eigen::Index tail = n - 1 - k;
    if (tail > 0) rhs.noalias() -= y.rightCols(tail) * t.row(k).tail(tail).adjoint();
    const Complex shift = std::conj(t(k, k));
    for (Eigen::Index i = 0; i < n; ++i) {
      shifted(i, i) = t(i, i) + shift;
      if (std::abs(shifted(i, i)) <= std::numeric_limits<Real>::epsilon() * (scale + Real(1)))
        throw SolverError("lyapunov: A has eigenvalues with lambda_i + conj(lambda_j) = 0",
                          std::numeric_limits<double>::infinity());
    }
    y.col(k) = shifted.template triangularView<Eigen::Upper>().solve(rhs);
  }
  DenseMatrix<Real> x = (u * y * u.adjoint()).real();
  return (x + x.transpose()) / Real(2);
}

}  // namespace scalarmix
