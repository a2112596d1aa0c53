#include "scalarmix/covariance.hpp"

#include "scalarmix/linalg.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace scalarmix {

namespace {

constexpr double kResidualTolerance = 1e-10;

void require_generator(const OperatorMatrix& a, const NoiseSpec& noise) {
  if (a.kind() != OperatorKind::Generator) throw OperatorError("covariance needs a generator matrix");
  if (!(a.nu() > 0.0))
    throw OperatorError("nu must be positive: the inviscid system has no stationary covariance");
  if (a.truncation() != noise.truncation()) throw OperatorError("noise/operator truncation mismatch");
}

/// Forced coordinates of a coupling block, as positions inside the block.
std::vector<Index> forced_positions(const std::vector<Index>& block, const Eigen::VectorXd& psi) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < block.size(); ++i)
    if (psi[block[i]] != 0.0) out.push_back(static_cast<Index>(i));
  return out;
}

void scatter(Eigen::MatrixXd& target, const std::vector<Index>& block, const Eigen::MatrixXd& local) {
  target(block, block) = local;
}

double parse_number(const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw FieldError("covariance file: bad number '" + text + "'");
  return value;
}

CovarianceProvenance parse_provenance(std::istringstream& fields) {
  CovarianceProvenance p;
  std::string source;
  fields >> source;
  bool known = false;
  for (auto candidate : {CovarianceSource::Lyapunov, CovarianceSource::Quadrature, CovarianceSource::ShearLimit,
                         CovarianceSource::Empirical, CovarianceSource::File})
    if (to_string(candidate) == source) {
      p.source = candidate;
      known = true;
    }
  if (!known) throw FieldError("covariance file: unknown provenance '" + source + "'");
  std::string token;
  while (fields >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FieldError("covariance file: bad provenance field '" + token + "'");
    const std::string key = token.substr(0, eq);
    const double value = parse_number(token.substr(eq + 1));
    if (key == "nu")
      p.nu = value;
    else if (key == "T")
      p.horizon = value;
    else if (key == "h")
      p.step = value;
    else if (key == "samples")
      p.samples = static_cast<Index>(value);
    else if (key == "residual")
      p.residual = value;
  }
  return p;
}

}  // namespace

NoiseSpec::NoiseSpec(int truncation, Eigen::VectorXd amplitudes)
    : truncation_(truncation), amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() != basis_dimension(truncation))
    throw FieldError("noise amplitude vector length does not match truncation");
}

std::vector<Index> NoiseSpec::forced_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < amplitudes_.size(); ++i)
    if (amplitudes_[i] != 0.0) out.push_back(i);
  return out;
}

NoiseSpec make_noise(int truncation, std::span<const FieldEntry> entries) {
  return NoiseSpec(truncation, make_field(truncation, entries).coefficients());
}

std::string to_string(CovarianceSource source) {
  switch (source) {
    case CovarianceSource::Lyapunov: return "lyapunov";
    case CovarianceSource::Quadrature: return "quadrature";
    case CovarianceSource::ShearLimit: return "shear-limit";
    case CovarianceSource::Empirical: return "empirical";
    case CovarianceSource::File: return "file";
  }
  return "unknown";
}

std::string CovarianceProvenance::describe() const {
  std::ostringstream out;
  out << to_string(source) << " nu=" << format_double(nu) << " T=" << format_double(horizon)
      << " h=" << format_double(step) << " samples=" << samples << " residual=" << format_double(residual);
  return out.str();
}

CovarianceOperator::CovarianceOperator(int truncation, Eigen::MatrixXd matrix, CovarianceProvenance provenance)
    : truncation_(truncation), matrix_(std::move(matrix)), provenance_(provenance) {
  if (matrix_.rows() != basis_dimension(truncation) || matrix_.cols() != matrix_.rows())
    throw FieldError("covariance matrix has the wrong dimension for its truncation");
}

double CovarianceOperator::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double CovarianceOperator::operator_norm() const { return symmetric_norm(matrix_); }

CovarianceOperator lyapunov_covariance(const OperatorMatrix& a, const NoiseSpec& noise, Index dense_cap) {
  require_generator(a, noise);
  const double nu = a.nu();
  const Index dim = a.dimension();
  const Eigen::VectorXd& psi = noise.amplitudes();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  double residual2 = 0.0;

  struct Solved {
    std::vector<Index> block;
    Eigen::MatrixXd a;
    Eigen::MatrixXd c;
  };
  std::vector<Solved> solved;
  for (const auto& block : a.blocks()) {
    if (forced_positions(block, psi).empty()) continue;
    if (static_cast<Index>(block.size()) > dense_cap)
      throw SolverError("lyapunov: coupling block of size " + std::to_string(block.size()) +
                            " exceeds the dense cap " + std::to_string(dense_cap),
                        std::numeric_limits<double>::infinity());
    const Eigen::MatrixXd sub = gather(a.entries(), block, block);
    const Eigen::VectorXd local_psi = gather(psi, block);
    const Eigen::MatrixXd c = nu * local_psi.array().square().matrix().asDiagonal().toDenseMatrix();
    Eigen::MatrixXd x = solve_continuous_lyapunov(sub, c);
    scatter(q, block, x);
    solved.push_back({block, sub, c});
  }

  auto block_residual = [&](const Solved& s) {
    const Eigen::MatrixXd x = q(s.block, s.block);
    return Eigen::MatrixXd(s.a * x + x * s.a.transpose() + s.c);
  };
  for (const auto& s : solved) residual2 += block_residual(s).squaredNorm();

  const double bound = kResidualTolerance * (a.entries().norm() * q.norm() + nu * noise.intensity());
  if (std::sqrt(residual2) > bound) {
    // one step of iterative refinement
    residual2 = 0.0;
    for (const auto& s : solved) {
      const Eigen::MatrixXd r = block_residual(s);
      const Eigen::MatrixXd correction = solve_continuous_lyapunov(s.a, r);
      q(s.block, s.block) += correction;
    }
    for (const auto& s : solved) residual2 += block_residual(s).squaredNorm();
    if (std::sqrt(residual2) > bound)
      throw SolverError("lyapunov: residual " + format_double(std::sqrt(residual2)) + " exceeds certificate " +
                            format_double(bound),
                        std::sqrt(residual2));
  }

  CovarianceProvenance provenance;
  provenance.source = CovarianceSource::Lyapunov;
  provenance.nu = nu;
  provenance.residual = std::sqrt(residual2);
  return CovarianceOperator(a.truncation(), std::move(q), provenance);
}

QuadratureCovariance covariance_by_quadrature(const OperatorMatrix& a, const NoiseSpec& noise, double horizon,
                                              double step) {
  require_generator(a, noise);
  if (!(horizon > 0.0) || !(step > 0.0)) throw OperatorError("quadrature horizon and step must be positive");
  const double nu = a.nu();
  const Index steps = std::max<Index>(1, static_cast<Index>(std::llround(horizon / step)));
  const double h = horizon / static_cast<double>(steps);
  const Eigen::VectorXd& psi = noise.amplitudes();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(a.dimension(), a.dimension());

  for (const auto& block : a.blocks()) {
    const std::vector<Index> forced = forced_positions(block, psi);
    if (forced.empty()) continue;
    const Eigen::MatrixXd sub = gather(a.entries(), block, block);
    const auto n = static_cast<Index>(block.size());
    const Eigen::MatrixXd propagator = dense_expm(sub, h);

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Index>(forced.size()));
    for (std::size_t j = 0; j < forced.size(); ++j)
      x(forced[j], static_cast<Index>(j)) = psi[block[static_cast<std::size_t>(forced[j])]];

    auto integrand = [&](const Eigen::MatrixXd& xs) { return Eigen::MatrixXd(nu * xs * xs.transpose()); };
    auto derivative = [&](const Eigen::MatrixXd& f) {
      return Eigen::MatrixXd(sub * f + f * sub.transpose());
    };

    const Eigen::MatrixXd f0 = integrand(x);
    Eigen::MatrixXd sum = 0.5 * f0;
    for (Index i = 1; i <= steps; ++i) {
      x = propagator * x;
      sum.noalias() += (i == steps ? 0.5 * nu : nu) * x * x.transpose();
    }
    const Eigen::MatrixXd ft = integrand(x);
    Eigen::MatrixXd local = h * sum - (h * h / 12.0) * (derivative(ft) - derivative(f0));
    local = 0.5 * (local + local.transpose()).eval();
    scatter(q, block, local);
  }

  CovarianceProvenance provenance;
  provenance.source = CovarianceSource::Quadrature;
  provenance.nu = nu;
  provenance.horizon = horizon;
  provenance.step = h;
  // lambda_1 = 1 on the 2pi-torus
  const double tail = std::exp(-2.0 * nu * horizon) * nu * noise.intensity() / (2.0 * nu);
  return {CovarianceOperator(a.truncation(), std::move(q), provenance), tail};
}

CovarianceOperator shear_limit_covariance(const NoiseSpec& noise) {
  Basis basis(noise.truncation());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(basis.dimension(), basis.dimension());
  for (Index i = 0; i < basis.dimension(); ++i) {
    const ModeIndex& k = basis.mode(i);
    if (k.k1 != 0) continue;
    const double psi = noise.amplitudes()[i];
    q(i, i) = psi * psi / (2.0 * k.k2 * k.k2);
  }
  CovarianceProvenance provenance;
  provenance.source = CovarianceSource::ShearLimit;
  provenance.nu = 0.0;
  return CovarianceOperator(noise.truncation(), std::move(q), provenance);
}

double h1_trace(const CovarianceOperator& q) {
  return q.matrix().diagonal().dot(Basis(q.truncation()).wavenumbers2());
}

ModeSelector select_all() {
  return [](const ModeIndex&, Parity) { return true; };
}

ModeSelector select_k1_zero() {
  return [](const ModeIndex& k, Parity) { return k.k1 == 0; };
}

ModeSelector select_k1_nonzero() {
  return [](const ModeIndex& k, Parity) { return k.k1 != 0; };
}

double block_operator_norm(const CovarianceOperator& q, const ModeSelector& selector) {
  Basis basis(q.truncation());
  std::vector<Index> picked;
  for (Index i = 0; i < basis.dimension(); ++i)
    if (selector(basis.mode(i), basis.parity(i))) picked.push_back(i);
  if (picked.empty()) return 0.0;
  return symmetric_norm(Eigen::MatrixXd(q.matrix()(picked, picked)));
}

double covariance_distance(const CovarianceOperator& q1, const CovarianceOperator& q2) {
  if (q1.truncation() != q2.truncation()) throw FieldError("covariance dimension mismatch");
  return symmetric_norm(Eigen::MatrixXd(q1.matrix() - q2.matrix()));
}

void write_covariance(std::ostream& out, const CovarianceOperator& q) {
  out << "# scalarmix covariance v1\n";
  out << "N " << q.truncation() << "\n";
  out << "dim " << q.dimension() << "\n";
  out << "provenance " << q.provenance().describe() << "\n";
  const Eigen::MatrixXd& m = q.matrix();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

CovarianceOperator read_covariance(std::istream& in) {
  std::string line;
  int truncation = -1;
  Index dim = -1;
  CovarianceProvenance provenance;
  provenance.source = CovarianceSource::File;
  std::vector<double> values;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    if (truncation < 0 || dim < 0 || line.rfind("provenance", first) == first) {
      std::string key;
      fields >> key;
      if (key == "N") {
        fields >> truncation;
      } else if (key == "dim") {
        fields >> dim;
      } else if (key == "provenance") {
        provenance = parse_provenance(fields);
      } else {
        throw FieldError("covariance file: unexpected header line '" + line + "'");
      }
      continue;
    }
    std::string token;
    while (fields >> token) values.push_back(parse_number(token));
  }
  if (truncation < 1 || dim != basis_dimension(truncation))
    throw FieldError("covariance file: missing or inconsistent N/dim header");
  if (static_cast<Index>(values.size()) != dim * dim)
    throw FieldError("covariance file: expected dim*dim values");
  Eigen::MatrixXd m(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) m(i, j) = values[static_cast<std::size_t>(i * dim + j)];
  return CovarianceOperator(truncation, std::move(m), provenance);
}

void write_eigen_summary_csv(std::ostream& out, const CovarianceOperator& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.matrix(), Eigen::EigenvaluesOnly);
  out << "index,eigenvalue\n";
  const Index n = eig.eigenvalues().size();
  for (Index j = 0; j < n; ++j) out << j << ',' << format_double(eig.eigenvalues()[n - 1 - j]) << '\n';
}

}  // namespace scalarmix
