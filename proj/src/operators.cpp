#include "scalarmix/operators.hpp"

#include "scalarmix/linalg.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

namespace scalarmix {

namespace {

using cd = std::complex<double>;

class DisjointSets {
 public:
  explicit DisjointSets(Index n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), Index{0});
  }
  Index find(Index i) {
    while (parent_[static_cast<std::size_t>(i)] != i) {
      auto& p = parent_[static_cast<std::size_t>(i)];
      p = parent_[static_cast<std::size_t>(p)];
      i = p;
    }
    return i;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[static_cast<std::size_t>(a)] = b;
  }

 private:
  std::vector<Index> parent_;
};

bool has_dissipation(const OperatorMatrix& a) {
  return a.kind() == OperatorKind::Dissipation || (a.kind() == OperatorKind::Generator && a.nu() > 0.0);
}

double block_semigroup_norm(const Eigen::MatrixXd& block, double t, const ExpmOptions& options) {
  if (block.rows() == 1) return std::exp(t * block(0, 0));
  if (block.rows() <= options.dense_cap) return spectral_norm(dense_expm(block, t));

  // power iteration on exp(tA)^T exp(tA) with Krylov actions
  const Eigen::MatrixXd transposed = block.transpose();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(block.rows()).normalized();
  double estimate = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    Eigen::VectorXd w = expm_multiply(block, t, v, options.krylov_tolerance);
    w = expm_multiply(transposed, t, w, options.krylov_tolerance);
    const double next = std::sqrt(std::max(0.0, v.dot(w)));
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (iter > 2 && std::abs(next - estimate) <= 1e-8 * next) return next;
    estimate = next;
  }
  return estimate;
}

}  // namespace

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Advection: return "advection";
    case OperatorKind::Dissipation: return "dissipation";
    case OperatorKind::Generator: return "generator";
  }
  return "unknown";
}

BlockPartition coupling_blocks(const Eigen::MatrixXd& m) {
  const Index n = m.rows();
  DisjointSets sets(n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && m(i, j) != 0.0) sets.unite(i, j);
  std::vector<Index> root_slot(static_cast<std::size_t>(n), -1);
  BlockPartition blocks;
  for (Index i = 0; i < n; ++i) {
    const Index r = sets.find(i);
    auto& slot = root_slot[static_cast<std::size_t>(r)];
    if (slot < 0) {
      slot = static_cast<Index>(blocks.size());
      blocks.emplace_back();
    }
    blocks[static_cast<std::size_t>(slot)].push_back(i);
  }
  return blocks;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Index>& rows,
                       const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows.size(); ++i)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Index>& rows) {
  Eigen::VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
  return out;
}

OperatorMatrix::OperatorMatrix(OperatorKind kind, int truncation, double nu, double s,
                               Eigen::MatrixXd entries)
    : kind_(kind), truncation_(truncation), nu_(nu), s_(s), entries_(std::move(entries)) {
  if (entries_.rows() != basis_dimension(truncation) || entries_.cols() != entries_.rows())
    throw OperatorError("operator matrix has the wrong dimension for its truncation");
  blocks_ = coupling_blocks(entries_);
}

OperatorMatrix advection_matrix(const Flow& flow, int truncation) {
  Basis basis(truncation);
  const Index dim = basis.dimension();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim, dim);
  const auto& velocity = flow.velocity();

  for (Index col = 0; col < dim; ++col) {
    const ModeIndex k = basis.mode(col);
    // complex components of the real basis function (common factor basis_scale() dropped)
    const cd zk = basis.parity(col) == Parity::Cos ? cd(0.5, 0.0) : cd(0.0, -0.5);
    const std::pair<ModeIndex, cd> parts[2] = {{k, zk}, {{-k.k1, -k.k2}, std::conj(zk)}};
    for (const auto& [mode, z] : parts) {
      for (const auto& v : velocity) {
        const ModeIndex p{mode.k1 + v.mode.k1, mode.k2 + v.mode.k2};
        if (!basis.contains(p)) continue;
        const cd contribution =
            cd(0.0, 1.0) * (v.ux * static_cast<double>(mode.k1) + v.uy * static_cast<double>(mode.k2)) * z;
        b(basis.index(p, Parity::Cos), col) += 2.0 * contribution.real();
        b(basis.index(p, Parity::Sin), col) -= 2.0 * contribution.imag();
      }
    }
  }
  return OperatorMatrix(OperatorKind::Advection, truncation, 0.0, 1.0, std::move(b));
}

OperatorMatrix dissipation_matrix(int truncation, double s) {
  if (!(s > 0.0)) throw OperatorError("dissipation order s must be positive");
  Basis basis(truncation);
  Eigen::VectorXd diag(basis.dimension());
  for (Index i = 0; i < basis.dimension(); ++i)
    diag[i] = -std::pow(static_cast<double>(basis.wavenumber2(i)), s);
  return OperatorMatrix(OperatorKind::Dissipation, truncation, 0.0, s, diag.asDiagonal().toDenseMatrix());
}

OperatorMatrix generator(const Flow& flow, double nu, int truncation, double s) {
  if (!(nu >= 0.0)) throw OperatorError("diffusivity nu must be nonnegative");
  const OperatorMatrix adv = advection_matrix(flow, truncation);
  const OperatorMatrix diss = dissipation_matrix(truncation, s);
  Eigen::MatrixXd a = -adv.entries();
  a.diagonal() += nu * diss.entries().diagonal();
  return OperatorMatrix(OperatorKind::Generator, truncation, nu, s, std::move(a));
}

FourierField semigroup_apply(const OperatorMatrix& a, double t, const FourierField& f,
                             const ExpmOptions& options) {
  if (f.truncation() != a.truncation()) throw OperatorError("field/operator truncation mismatch");
  if (t < 0.0 && has_dissipation(a))
    throw OperatorError("negative time is only allowed for the inviscid (nu = 0) group");
  if (t == 0.0) return f;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.dimension());
  const Eigen::VectorXd& in = f.coefficients();
  for (const auto& block : a.blocks()) {
    const Eigen::VectorXd local = gather(in, block);
    if (local.isZero(0.0)) continue;
    Eigen::VectorXd result;
    if (block.size() == 1) {
      result = std::exp(t * a.entries()(block[0], block[0])) * local;
    } else {
      const Eigen::MatrixXd sub = gather(a.entries(), block, block);
      if (sub.rows() <= options.dense_cap)
        result = dense_expm(sub, t) * local;
      else
        result = expm_multiply(sub, t, local, options.krylov_tolerance);
    }
    for (std::size_t i = 0; i < block.size(); ++i) out[block[i]] = result[static_cast<Index>(i)];
  }
  return FourierField(f.truncation(), std::move(out));
}

double semigroup_norm(const OperatorMatrix& a, double t, const ExpmOptions& options) {
  if (t < 0.0) throw OperatorError("semigroup_norm requires t >= 0");
  if (t == 0.0) return 1.0;
  double worst = 0.0;
  for (const auto& block : a.blocks())
    worst = std::max(worst, block_semigroup_norm(gather(a.entries(), block, block), t, options));
  return worst;
}

StepPropagator::StepPropagator(const OperatorMatrix& a, double step, const ExpmOptions& options)
    : dimension_(a.dimension()), step_(step), options_(options) {
  if (step < 0.0 && has_dissipation(a))
    throw OperatorError("negative time is only allowed for the inviscid (nu = 0) group");
  for (const auto& indices : a.blocks()) {
    Block b;
    b.indices = indices;
    const Eigen::MatrixXd sub = gather(a.entries(), indices, indices);
    if (sub.rows() <= options.dense_cap)
      b.dense = dense_expm(sub, step);
    else
      b.generator = sub;
    blocks_.push_back(std::move(b));
  }
}

Eigen::VectorXd StepPropagator::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(dimension_);
  for (const auto& b : blocks_) {
    const Eigen::VectorXd local = gather(v, b.indices);
    const Eigen::VectorXd r = b.generator.size() > 0
                                  ? expm_multiply(b.generator, step_, local, options_.krylov_tolerance)
                                  : Eigen::VectorXd(b.dense * local);
    for (std::size_t i = 0; i < b.indices.size(); ++i) out[b.indices[i]] = r[static_cast<Index>(i)];
  }
  return out;
}

Eigen::MatrixXd StepPropagator::apply(const Eigen::MatrixXd& m) const {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (const auto& b : blocks_) {
    const Eigen::MatrixXd local = m(b.indices, Eigen::all);
    if (b.generator.size() > 0) {
      Eigen::MatrixXd r(local.rows(), local.cols());
      for (Index j = 0; j < local.cols(); ++j)
        r.col(j) = expm_multiply(b.generator, step_, Eigen::VectorXd(local.col(j)),
                                 options_.krylov_tolerance);
      out(b.indices, Eigen::all) = r;
    } else {
      out(b.indices, Eigen::all) = b.dense * local;
    }
  }
  return out;
}

Eigen::MatrixXd StepPropagator::matrix() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dimension_, dimension_);
  for (const auto& b : blocks_) {
    const Eigen::MatrixXd dense =
        b.generator.size() > 0 ? dense_expm(b.generator, step_) : b.dense;
    for (std::size_t j = 0; j < b.indices.size(); ++j)
      for (std::size_t i = 0; i < b.indices.size(); ++i)
        out(b.indices[i], b.indices[j]) = dense(static_cast<Index>(i), static_cast<Index>(j));
  }
  return out;
}

void write_triplets(std::ostream& out, const OperatorMatrix& a) {
  out << "# scalarmix operator v1 kind=" << to_string(a.kind()) << " N=" << a.truncation()
      << " nu=" << format_double(a.nu()) << " s=" << format_double(a.order()) << "\n";
  const auto& m = a.entries();
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) out << i << ' ' << j << ' ' << format_double(m(i, j)) << '\n';
}

}  // namespace scalarmix
