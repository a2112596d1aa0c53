#include "scalarmix/fourier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace scalarmix {

namespace {

using cd = std::complex<double>;

Eigen::MatrixXcd exponential_table(Index grid, int truncation, double sign) {
  const Index width = 2 * truncation + 1;
  Eigen::MatrixXcd table(grid, width);
  for (Index i = 0; i < grid; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(grid);
    for (Index a = 0; a < width; ++a) {
      const double k = static_cast<double>(a - truncation);
      table(i, a) = std::polar(1.0, sign * k * x);
    }
  }
  return table;
}

void check_truncation(int truncation) {
  if (truncation < 1) throw FieldError("truncation order must be positive");
}

}  // namespace

char parity_tag(Parity p) { return p == Parity::Cos ? 'c' : 's'; }

Parity parse_parity(const std::string& tag) {
  if (tag == "c" || tag == "cos") return Parity::Cos;
  if (tag == "s" || tag == "sin") return Parity::Sin;
  throw FieldError("unknown parity tag '" + tag + "' (expected c/cos or s/sin)");
}

int ModeIndex::sup_norm() const { return std::max(std::abs(k1), std::abs(k2)); }

double basis_scale() { return std::numbers::sqrt2 / (2.0 * std::numbers::pi); }

Index basis_dimension(int truncation) {
  const Index side = 2 * static_cast<Index>(truncation) + 1;
  return side * side - 1;
}

Basis::Basis(int truncation) : truncation_(truncation) {
  check_truncation(truncation);
  modes_.reserve(static_cast<std::size_t>(basis_dimension(truncation) / 2));
  for (int k2 = 1; k2 <= truncation; ++k2) modes_.push_back({0, k2});
  for (int k1 = 1; k1 <= truncation; ++k1)
    for (int k2 = -truncation; k2 <= truncation; ++k2) modes_.push_back({k1, k2});
}

bool Basis::contains(const ModeIndex& k) const {
  return k.is_canonical() && k.sup_norm() <= truncation_;
}

Index Basis::index(const ModeIndex& k, Parity p) const {
  if (k.k1 == 0 && k.k2 == 0) throw FieldError("mode (0,0) is excluded: fields are mean-zero");
  if (!k.is_canonical()) throw FieldError("mode is not a half-lattice representative");
  if (k.sup_norm() > truncation_) {
    throw FieldError("mode (" + std::to_string(k.k1) + "," + std::to_string(k.k2) +
                     ") exceeds truncation " + std::to_string(truncation_));
  }
  Index m = 0;
  if (k.k1 == 0) {
    m = k.k2 - 1;
  } else {
    m = truncation_ + static_cast<Index>(k.k1 - 1) * (2 * truncation_ + 1) + (k.k2 + truncation_);
  }
  return 2 * m + static_cast<Index>(p);
}

Eigen::VectorXd Basis::wavenumbers2() const {
  Eigen::VectorXd w(dimension());
  for (Index i = 0; i < dimension(); ++i) w[i] = wavenumber2(i);
  return w;
}

FourierField::FourierField(int truncation)
    : truncation_(truncation), coeffs_(Eigen::VectorXd::Zero(basis_dimension(truncation))) {
  check_truncation(truncation);
}

FourierField::FourierField(int truncation, Eigen::VectorXd coefficients)
    : truncation_(truncation), coeffs_(std::move(coefficients)) {
  check_truncation(truncation);
  if (coeffs_.size() != basis_dimension(truncation))
    throw FieldError("coefficient vector length does not match truncation");
}

double FourierField::coefficient(const ModeIndex& k, Parity p) const {
  Basis basis(truncation_);
  return coeffs_[basis.index(k, p)];
}

namespace {

FourierField build_field(int truncation, std::span<const FieldEntry> entries, double scale) {
  Basis basis(truncation);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis.dimension());
  std::vector<bool> seen(static_cast<std::size_t>(basis.dimension()), false);
  for (const auto& e : entries) {
    ModeIndex k = e.mode;
    double amplitude = e.amplitude;
    if (k.k1 == 0 && k.k2 == 0)
      throw FieldError("mode (0,0) is excluded: fields are mean-zero");
    if (!k.is_canonical()) {
      k = {-k.k1, -k.k2};
      if (e.parity == Parity::Sin) amplitude = -amplitude;
    }
    const Index slot = basis.index(k, e.parity);
    if (seen[static_cast<std::size_t>(slot)])
      throw FieldError("duplicate entry for mode (" + std::to_string(k.k1) + "," +
                       std::to_string(k.k2) + ") parity " + parity_tag(e.parity));
    seen[static_cast<std::size_t>(slot)] = true;
    coeffs[slot] = amplitude * scale;
  }
  return FourierField(truncation, std::move(coeffs));
}

}  // namespace

FourierField make_field(int truncation, std::span<const FieldEntry> entries) {
  return build_field(truncation, entries, 1.0);
}

FourierField make_trig_field(int truncation, std::span<const FieldEntry> entries) {
  return build_field(truncation, entries, 1.0 / basis_scale());
}

FourierField resize(const FourierField& f, int truncation) {
  Basis from(f.truncation());
  Basis to(truncation);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(to.dimension());
  for (Index i = 0; i < from.dimension(); ++i) {
    const ModeIndex& k = from.mode(i);
    if (k.sup_norm() <= truncation) coeffs[to.index(k, from.parity(i))] = f.coefficients()[i];
  }
  return FourierField(truncation, std::move(coeffs));
}

double inner_product(const FourierField& f, const FourierField& g) {
  if (f.truncation() != g.truncation()) throw FieldError("truncation mismatch");
  return f.coefficients().dot(g.coefficients());
}

double sobolev_norm(const FourierField& f, double s) {
  Basis basis(f.truncation());
  double sum = 0.0;
  for (Index i = 0; i < basis.dimension(); ++i) {
    const double c = f.coefficients()[i];
    if (c == 0.0) continue;
    sum += std::pow(static_cast<double>(basis.wavenumber2(i)), s) * c * c;
  }
  return std::sqrt(sum);
}

FourierField project_low(const FourierField& f, int order) {
  if (order > f.truncation()) throw FieldError("projection order exceeds field truncation");
  Basis basis(f.truncation());
  Eigen::VectorXd coeffs = f.coefficients();
  for (Index i = 0; i < basis.dimension(); ++i)
    if (basis.mode(i).sup_norm() > order) coeffs[i] = 0.0;
  return FourierField(f.truncation(), std::move(coeffs));
}

FourierField project_wavenumber2(const FourierField& f, double max_wavenumber2) {
  Basis basis(f.truncation());
  Eigen::VectorXd coeffs = f.coefficients();
  for (Index i = 0; i < basis.dimension(); ++i)
    if (basis.wavenumber2(i) > max_wavenumber2) coeffs[i] = 0.0;
  return FourierField(f.truncation(), std::move(coeffs));
}

int laplacian_eigenvalue(int truncation, Index count) {
  Basis basis(truncation);
  if (count < 1 || count > basis.dimension())
    throw FieldError("eigenvalue count outside [1, dimension]");
  std::vector<Index> order(static_cast<std::size_t>(basis.dimension()));
  for (Index i = 0; i < basis.dimension(); ++i) order[static_cast<std::size_t>(i)] = i;
  auto key = [&](Index i) {
    const ModeIndex& k = basis.mode(i);
    return std::make_tuple(k.wavenumber2(), std::abs(k.k1), std::abs(k.k2),
                           static_cast<int>(basis.parity(i)), i);
  };
  std::nth_element(order.begin(), order.begin() + (count - 1), order.end(),
                   [&](Index a, Index b) { return key(a) < key(b); });
  return basis.wavenumber2(order[static_cast<std::size_t>(count - 1)]);
}

FourierField project_eigen_count(const FourierField& f, Index count) {
  return project_wavenumber2(f, laplacian_eigenvalue(f.truncation(), count));
}

Eigen::MatrixXcd complex_amplitudes(const FourierField& f) {
  const int n = f.truncation();
  Basis basis(n);
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(2 * n + 1, 2 * n + 1);
  for (Index m = 0; m < basis.mode_count(); ++m) {
    const ModeIndex& k = basis.mode(2 * m);
    const double a = f.coefficients()[2 * m];
    const double b = f.coefficients()[2 * m + 1];
    const cd zk(0.5 * a, -0.5 * b);
    z(k.k1 + n, k.k2 + n) = zk;
    z(-k.k1 + n, -k.k2 + n) = std::conj(zk);
  }
  return z;
}

FourierField from_complex_amplitudes(const Eigen::MatrixXcd& amplitudes, int truncation) {
  const Index half = (amplitudes.rows() - 1) / 2;
  Basis basis(truncation);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis.dimension());
  for (Index m = 0; m < basis.mode_count(); ++m) {
    const ModeIndex& k = basis.mode(2 * m);
    if (k.sup_norm() > half) continue;
    const cd zk = amplitudes(k.k1 + half, k.k2 + half);
    coeffs[2 * m] = 2.0 * zk.real();
    coeffs[2 * m + 1] = -2.0 * zk.imag();
  }
  return FourierField(truncation, std::move(coeffs));
}

Eigen::MatrixXd sample_grid(const FourierField& f, Index grid) {
  const int n = f.truncation();
  if (grid < 2 * n + 2)
    throw FieldError("grid size " + std::to_string(grid) + " too small for truncation " +
                     std::to_string(n) + " (need >= 2N+2)");
  const Eigen::MatrixXcd ex = exponential_table(grid, n, +1.0);
  const Eigen::MatrixXcd values = ex * complex_amplitudes(f) * ex.transpose();
  return basis_scale() * values.real();
}

FourierField analyze_grid(const Eigen::MatrixXd& values, int truncation) {
  const Index grid = values.rows();
  if (values.cols() != grid) throw FieldError("grid must be square");
  if (grid < 2 * truncation + 1) throw FieldError("grid too small for truncation");
  const Eigen::MatrixXcd ex = exponential_table(grid, truncation, -1.0);
  const double norm = 1.0 / (basis_scale() * static_cast<double>(grid * grid));
  const Eigen::MatrixXcd z = norm * (ex.transpose() * values.cast<cd>() * ex);
  return from_complex_amplitudes(z, truncation);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_field(std::ostream& out, const FourierField& f) {
  Basis basis(f.truncation());
  out << "# scalarmix field v1\n";
  out << "N " << f.truncation() << "\n";
  for (Index i = 0; i < basis.dimension(); ++i) {
    const ModeIndex& k = basis.mode(i);
    out << k.k1 << ' ' << k.k2 << ' ' << parity_tag(basis.parity(i)) << ' '
        << format_double(f.coefficients()[i]) << '\n';
  }
}

FourierField read_field(std::istream& in) {
  std::string line;
  int truncation = -1;
  std::vector<FieldEntry> entries;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    if (truncation < 0) {
      std::string key;
      fields >> key >> truncation;
      if (key != "N" || !fields || truncation < 1)
        throw FieldError("field file: expected header 'N <truncation>' at line " +
                         std::to_string(line_no));
      continue;
    }
    FieldEntry e;
    std::string tag, amplitude;
    fields >> e.mode.k1 >> e.mode.k2 >> tag >> amplitude;
    if (!fields) throw FieldError("field file: malformed record at line " + std::to_string(line_no));
    e.parity = parse_parity(tag);
    const char* end = amplitude.data() + amplitude.size();
    auto [ptr, ec] = std::from_chars(amplitude.data(), end, e.amplitude);
    if (ec != std::errc() || ptr != end)
      throw FieldError("field file: bad amplitude at line " + std::to_string(line_no));
    entries.push_back(e);
  }
  if (truncation < 0) throw FieldError("field file: missing header");
  return make_field(truncation, entries);
}

}  // namespace scalarmix
