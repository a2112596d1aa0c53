#include "scalarmix/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

namespace scalarmix {

namespace {

using cd = std::complex<double>;

OperatorMatrix inviscid_generator(const Flow& flow, int truncation) {
  return OperatorMatrix(OperatorKind::Generator, truncation, 0.0, 1.0,
                        -advection_matrix(flow, truncation).entries());
}

double h1_norm2(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& wavenumbers2) {
  return (coeffs.array().square() * wavenumbers2.array()).sum();
}

double low_mode_norm2(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& wavenumbers2, double cutoff) {
  return ((wavenumbers2.array() <= cutoff).cast<double>() * coeffs.array().square()).sum();
}

/// Columns: y-samples of e^{i k2 y} for k2 = -N..N.
Eigen::MatrixXcd y_table(Index grid, int truncation) {
  Eigen::MatrixXcd table(grid, 2 * truncation + 1);
  for (Index j = 0; j < grid; ++j) {
    const double y = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(grid);
    for (int b = 0; b <= 2 * truncation; ++b) table(j, b) = std::polar(1.0, (b - truncation) * y);
  }
  return table;
}

/// Characteristic solution f0(x - u(y) t, y) of a shear flow, sampled on a
/// y-grid. Set up once per initial field; each evolve() call only applies the
/// phase and transforms back the requested |k1|, |k2| <= band.
class ShearCharacteristics {
 public:
  ShearCharacteristics(const ShearProfile& profile, const FourierField& f0, Index ygrid)
      : n_(f0.truncation()), table_(y_table(ygrid, n_)), u_(ygrid) {
    profiles_ = table_ * complex_amplitudes(f0).transpose();
    for (Index j = 0; j < ygrid; ++j)
      u_[j] = profile.value(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(ygrid));
  }

  FourierField evolve(double t, int band) const {
    const Index ygrid = table_.rows();
    const Index width = 2 * band + 1;
    Eigen::MatrixXcd phased = profiles_.middleCols(n_ - band, width);
    for (Index a = 0; a < width; ++a) {
      const double k1 = static_cast<double>(a - band);
      if (k1 == 0.0) continue;
      for (Index j = 0; j < ygrid; ++j) phased(j, a) *= std::polar(1.0, -k1 * u_[j] * t);
    }
    Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(2 * n_ + 1, 2 * n_ + 1);
    z.block(n_ - band, n_ - band, width, width) =
        (table_.middleCols(n_ - band, width).adjoint() * phased).transpose() / static_cast<double>(ygrid);
    return from_complex_amplitudes(z, n_);
  }

 private:
  int n_;
  Eigen::MatrixXcd table_;
  Eigen::MatrixXcd profiles_;
  Eigen::VectorXd u_;
};

double profile_amplitude(const ShearProfile& profile) {
  double sum = 0.0;
  for (double a : profile.cos_coeffs) sum += std::abs(a);
  for (double b : profile.sin_coeffs) sum += std::abs(b);
  return sum;
}

/// Trapezoid rule with n uniform steps of a sampled integrand.
template <typename Sample>
double trapezoid_average(double horizon, Index steps, Sample&& sample) {
  const double h = horizon / static_cast<double>(steps);
  double sum = 0.5 * sample(Index{0});
  for (Index i = 1; i < steps; ++i) sum += sample(i);
  sum += 0.5 * sample(steps);
  return sum * h / horizon;
}

Index step_count(double horizon, double max_step) {
  return std::max<Index>(1, static_cast<Index>(std::ceil(horizon / max_step - 1e-9)));
}

/// Bin means of grid values under a fixed ordering of grid points.
Eigen::MatrixXd bin_average(const Eigen::MatrixXd& values, const std::vector<Index>& order, int bins) {
  Eigen::MatrixXd out(values.rows(), values.cols());
  const auto total = static_cast<Index>(order.size());
  for (int b = 0; b < bins; ++b) {
    const Index lo = total * b / bins;
    const Index hi = total * (b + 1) / bins;
    if (hi <= lo) continue;
    double mean = 0.0;
    for (Index i = lo; i < hi; ++i) mean += values.data()[order[static_cast<std::size_t>(i)]];
    mean /= static_cast<double>(hi - lo);
    for (Index i = lo; i < hi; ++i) out.data()[order[static_cast<std::size_t>(i)]] = mean;
  }
  return out;
}

}  // namespace

std::string to_string(GrowthMethod method) {
  return method == GrowthMethod::ShearExact ? "shear-exact" : "truncated-exponential";
}

SpectrumReport spectrum(const OperatorMatrix& advection, double kernel_tolerance) {
  if (advection.kind() != OperatorKind::Advection)
    throw OperatorError("spectrum requires an advection matrix");
  const Index dim = advection.dimension();
  const Eigen::MatrixXd& b = advection.entries();
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());

  std::vector<double> lambdas;
  lambdas.reserve(static_cast<std::size_t>(dim));
  Eigen::MatrixXcd vectors = Eigen::MatrixXcd::Zero(dim, dim);
  SpectrumReport report;
  report.truncation = advection.truncation();
  Index column = 0;
  for (const auto& block : advection.blocks()) {
    const Eigen::MatrixXd sub = gather(b, block, block);
    const Eigen::MatrixXcd hermitian = cd(0.0, 1.0) * sub.cast<cd>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian);
    for (Index j = 0; j < eig.eigenvalues().size(); ++j) {
      const double lambda = -eig.eigenvalues()[j];
      const Eigen::VectorXcd v = eig.eigenvectors().col(j);
      const Eigen::VectorXcd bv = sub.cast<cd>() * v;
      report.max_real_part = std::max(report.max_real_part, std::abs(v.dot(bv).real()));
      report.max_residual = std::max(report.max_residual, (bv - cd(0.0, lambda) * v).norm());
      lambdas.push_back(lambda);
      for (std::size_t i = 0; i < block.size(); ++i) vectors(block[i], column) = v[static_cast<Index>(i)];
      ++column;
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
    return lambdas[static_cast<std::size_t>(x)] < lambdas[static_cast<std::size_t>(y)];
  });
  report.frequencies.resize(dim);
  report.eigenvectors.resize(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    report.frequencies[j] = lambdas[static_cast<std::size_t>(src)];
    report.eigenvectors.col(j) = vectors.col(src);
    if (std::abs(report.frequencies[j]) <= kernel_tolerance * scale) ++report.kernel_dimension;
  }
  return report;
}

FourierField shear_E_projection(const FourierField& f) {
  Basis basis(f.truncation());
  Eigen::VectorXd coeffs = f.coefficients();
  for (Index i = 0; i < basis.dimension(); ++i)
    if (basis.mode(i).k1 != 0) coeffs[i] = 0.0;
  return FourierField(f.truncation(), std::move(coeffs));
}

StreamlineProjection streamline_projection(const Flow& flow, const FourierField& f, int bins, Index grid) {
  if (!flow.streamfunction()) throw FlowError("streamline projection needs a cellular or custom flow");
  if (bins < 2) throw FieldError("streamline projection needs at least 2 bins");
  const int n = f.truncation();
  if (grid < 4 * n) throw FieldError("streamline projection grid must be at least 4N");

  const Eigen::MatrixXd psi = streamfunction_grid(flow, grid);
  std::vector<Index> order(static_cast<std::size_t>(psi.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return psi.data()[a] < psi.data()[b]; });

  auto project = [&](const FourierField& g) {
    if (g.is_zero()) return g;
    return analyze_grid(bin_average(sample_grid(g, grid), order, bins), n);
  };
  StreamlineProjection result{project(f), 0.0};
  const double norm = result.field.l2_norm();
  if (norm > 0.0) {
    const FourierField twice = project(result.field);
    result.idempotence_deviation = (twice.coefficients() - result.field.coefficients()).norm() / norm;
  }
  return result;
}

Index shear_required_grid(const ShearProfile& profile, int truncation, double t) {
  const double spread = static_cast<double>(truncation) * std::abs(t) * profile_amplitude(profile);
  const double bandwidth = profile.max_wavenumber() * (spread + 10.0 * std::cbrt(spread + 1.0) + 20.0);
  auto grid = static_cast<Index>(2.0 * (truncation + bandwidth) + 2.0);
  return (grid + 7) / 8 * 8;
}

FourierField shear_exact_evolution(const ShearProfile& profile, const FourierField& f0, double t, Index ygrid) {
  const int n = f0.truncation();
  if (ygrid == 0) ygrid = std::max<Index>(8 * n, shear_required_grid(profile, n, t));
  if (ygrid < 8 * n) throw FieldError("shear evolution y-grid must be at least 8N");
  if (t == 0.0) return f0;
  return ShearCharacteristics(profile, f0, ygrid).evolve(t, n);
}

double shear_exact_h1_norm2(const ShearProfile& profile, const FourierField& f0, double t, Index ygrid) {
  const int n = f0.truncation();
  if (ygrid == 0) ygrid = std::max<Index>(8 * n, 2 * (n + profile.max_wavenumber()) + 2);
  const Eigen::MatrixXcd table = y_table(ygrid, n);
  const Eigen::MatrixXcd z = complex_amplitudes(f0).transpose();
  Eigen::MatrixXcd dz = z;
  for (int b = 0; b <= 2 * n; ++b) dz.row(b) *= cd(0.0, static_cast<double>(b - n));
  const Eigen::MatrixXcd g = table * z;
  const Eigen::MatrixXcd dg = table * dz;

  // |S(t) f|^2 integrands: k1^2 |g|^2 + |g' - i k1 t u' g|^2 (the phase has modulus one)
  double sum = 0.0;
  for (Index j = 0; j < ygrid; ++j) {
    const double y = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(ygrid);
    const double du = profile.derivative(y);
    for (int a = 0; a <= 2 * n; ++a) {
      const double k1 = a - n;
      sum += k1 * k1 * std::norm(g(j, a)) + std::norm(dg(j, a) - cd(0.0, k1 * t * du) * g(j, a));
    }
  }
  const double c = basis_scale();
  return c * c * 2.0 * std::numbers::pi * (2.0 * std::numbers::pi / static_cast<double>(ygrid)) * sum;
}

GrowthCurve h1_growth_average(const Flow& flow, const FourierField& f0, const std::vector<double>& times,
                              GrowthMethod method, double max_step) {
  if (f0.is_zero()) throw FieldError("growth probe needs a nonzero initial field");
  if (method == GrowthMethod::ShearExact && flow.kind() != FlowKind::Shear)
    throw FlowError("shear-exact growth requires a shear flow");
  GrowthCurve curve;
  curve.method = method;
  curve.flow = describe(flow);
  curve.initial_h1_norm2 = std::pow(sobolev_norm(f0, 1.0), 2);
  const Eigen::VectorXd k2 = Basis(f0.truncation()).wavenumbers2();
  const OperatorMatrix a = method == GrowthMethod::TruncatedExponential
                               ? inviscid_generator(flow, f0.truncation())
                               : OperatorMatrix(OperatorKind::Generator, f0.truncation(), 0.0, 1.0,
                                                Eigen::MatrixXd::Zero(f0.dimension(), f0.dimension()));

  for (double horizon : times) {
    if (!(horizon > 0.0)) throw FieldError("growth times must be positive");
    const Index steps = step_count(horizon, max_step > 0.0 ? max_step : horizon / 1000.0);
    const double h = horizon / static_cast<double>(steps);
    double value = 0.0;
    if (method == GrowthMethod::ShearExact) {
      const Index ygrid = std::max<Index>(8 * f0.truncation(),
                                          2 * (f0.truncation() + flow.profile()->max_wavenumber()) + 2);
      value = trapezoid_average(horizon, steps, [&](Index i) {
        return shear_exact_h1_norm2(*flow.profile(), f0, static_cast<double>(i) * h, ygrid);
      });
    } else {
      const StepPropagator step(a, h);
      Eigen::VectorXd v = f0.coefficients();
      value = trapezoid_average(horizon, steps, [&](Index i) {
        if (i > 0) v = step.apply(v);
        return h1_norm2(v, k2);
      });
    }
    curve.times.push_back(horizon);
    curve.values.push_back(value);
    curve.steps.push_back(h);
  }
  return curve;
}

double low_mode_time_average(const Flow& flow, const FourierField& f0, double horizon,
                             const LowModeOptions& options) {
  if (!(horizon > 0.0)) throw FieldError("time horizon must be positive");
  const int n = f0.truncation();
  const Eigen::VectorXd k2 = Basis(n).wavenumbers2();
  FourierField fluctuation(n);
  if (flow.kind() == FlowKind::Shear) {
    fluctuation = FourierField(n, f0.coefficients() - shear_E_projection(f0).coefficients());
  } else {
    const Index grid = std::max<Index>(options.grid, 4 * n);
    fluctuation = FourierField(
        n, f0.coefficients() - streamline_projection(flow, f0, options.bins, grid).field.coefficients());
  }
  if (fluctuation.is_zero()) return 0.0;

  const double max_step = options.step > 0.0 ? options.step : std::min(horizon / 1000.0, 0.01);
  const Index steps = step_count(horizon, max_step);
  const double h = horizon / static_cast<double>(steps);

  if (flow.kind() == FlowKind::Shear) {
    const Index ygrid = std::max<Index>(8 * n, shear_required_grid(*flow.profile(), n, horizon));
    const ShearCharacteristics characteristics(*flow.profile(), fluctuation, ygrid);
    const int band = std::min(n, static_cast<int>(std::floor(std::sqrt(options.max_wavenumber2))));
    return trapezoid_average(horizon, steps, [&](Index i) {
      const FourierField ft = characteristics.evolve(static_cast<double>(i) * h, band);
      return low_mode_norm2(ft.coefficients(), k2, options.max_wavenumber2);
    });
  }
  const StepPropagator step(inviscid_generator(flow, n), h);
  Eigen::VectorXd v = fluctuation.coefficients();
  return trapezoid_average(horizon, steps, [&](Index i) {
    if (i > 0) v = step.apply(v);
    return low_mode_norm2(v, k2, options.max_wavenumber2);
  });
}

void write_growth_csv(std::ostream& out, const GrowthCurve& curve) {
  out << "T,G\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    out << format_double(curve.times[i]) << ',' << format_double(curve.values[i]) << '\n';
}

void write_spectrum_csv(std::ostream& out, const SpectrumReport& report) {
  out << "index,lambda\n";
  for (Index j = 0; j < report.frequencies.size(); ++j)
    out << j << ',' << format_double(report.frequencies[j]) << '\n';
}

}  // namespace scalarmix
