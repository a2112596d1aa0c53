#include "scalarmix/flows.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace scalarmix {

namespace {

using cd = std::complex<double>;

constexpr int kDerivativeSamples = 10000;

}  // namespace

std::string to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::Shear: return "shear";
    case FlowKind::Cellular: return "cellular";
    case FlowKind::Custom: return "custom";
  }
  return "unknown";
}

int ShearProfile::max_wavenumber() const {
  int m = 0;
  for (std::size_t j = 0; j < cos_coeffs.size(); ++j)
    if (cos_coeffs[j] != 0.0) m = std::max(m, static_cast<int>(j + 1));
  for (std::size_t j = 0; j < sin_coeffs.size(); ++j)
    if (sin_coeffs[j] != 0.0) m = std::max(m, static_cast<int>(j + 1));
  return m;
}

bool ShearProfile::is_zero() const { return max_wavenumber() == 0; }

double ShearProfile::value(double y) const {
  double u = 0.0;
  for (std::size_t j = 0; j < cos_coeffs.size(); ++j) u += cos_coeffs[j] * std::cos((j + 1.0) * y);
  for (std::size_t j = 0; j < sin_coeffs.size(); ++j) u += sin_coeffs[j] * std::sin((j + 1.0) * y);
  return u;
}

double ShearProfile::derivative(double y) const {
  double du = 0.0;
  for (std::size_t j = 0; j < cos_coeffs.size(); ++j)
    du -= (j + 1.0) * cos_coeffs[j] * std::sin((j + 1.0) * y);
  for (std::size_t j = 0; j < sin_coeffs.size(); ++j)
    du += (j + 1.0) * sin_coeffs[j] * std::cos((j + 1.0) * y);
  return du;
}

void Flow::finish() {
  max_wavenumber_ = 0;
  lipschitz_bound_ = 0.0;
  for (const auto& v : velocity_) {
    max_wavenumber_ = std::max(max_wavenumber_, v.mode.sup_norm());
    const double q = std::sqrt(static_cast<double>(v.mode.wavenumber2()));
    lipschitz_bound_ += q * std::sqrt(std::norm(v.ux) + std::norm(v.uy));
  }
}

std::pair<double, double> Flow::evaluate(double x, double y) const {
  cd ux = 0.0, uy = 0.0;
  for (const auto& v : velocity_) {
    const cd e = std::polar(1.0, v.mode.k1 * x + v.mode.k2 * y);
    ux += v.ux * e;
    uy += v.uy * e;
  }
  return {ux.real(), uy.real()};
}

Flow make_shear(const ShearProfile& profile) {
  if (profile.is_zero()) throw FlowError("shear profile is identically zero");
  Flow flow;
  flow.kind_ = FlowKind::Shear;
  flow.profile_ = profile;
  const int m = profile.max_wavenumber();
  for (int j = 1; j <= m; ++j) {
    const double a = j <= static_cast<int>(profile.cos_coeffs.size()) ? profile.cos_coeffs[j - 1] : 0.0;
    const double b = j <= static_cast<int>(profile.sin_coeffs.size()) ? profile.sin_coeffs[j - 1] : 0.0;
    if (a == 0.0 && b == 0.0) continue;
    const cd uj(0.5 * a, -0.5 * b);
    flow.velocity_.push_back({{0, j}, uj, 0.0});
    flow.velocity_.push_back({{0, -j}, std::conj(uj), 0.0});
  }
  flow.finish();

  int zeros = 0;
  double previous = profile.derivative(0.0);
  for (int i = 1; i <= kDerivativeSamples; ++i) {
    const double y = 2.0 * std::numbers::pi * i / kDerivativeSamples;
    const double current = profile.derivative(y);
    if ((previous < 0.0 && current >= 0.0) || (previous > 0.0 && current <= 0.0)) ++zeros;
    previous = current;
  }
  flow.derivative_zeros_ = zeros;
  flow.nondegenerate_ = true;
  return flow;
}

namespace {

std::vector<VelocityMode> perp_gradient(const FourierField& psi) {
  const int n = psi.truncation();
  const Eigen::MatrixXcd z = complex_amplitudes(psi);
  const double c = basis_scale();
  std::vector<VelocityMode> modes;
  for (int k1 = -n; k1 <= n; ++k1) {
    for (int k2 = -n; k2 <= n; ++k2) {
      const cd zk = z(k1 + n, k2 + n);
      if (zk == cd(0.0)) continue;
      const cd ux = c * zk * cd(0.0, -static_cast<double>(k2));
      const cd uy = c * zk * cd(0.0, static_cast<double>(k1));
      modes.push_back({{k1, k2}, ux, uy});
    }
  }
  return modes;
}

}  // namespace

Flow make_cellular(const FourierField& streamfunction) {
  if (streamfunction.is_zero()) throw FlowError("streamfunction is identically zero");
  Flow flow;
  flow.kind_ = FlowKind::Cellular;
  flow.streamfunction_ = streamfunction;
  flow.velocity_ = perp_gradient(streamfunction);
  flow.finish();
  flow.nondegenerate_ = true;
  return flow;
}

Flow make_custom(const FourierField& streamfunction) {
  if (streamfunction.is_zero()) throw FlowError("streamfunction is identically zero");
  Flow flow;
  flow.kind_ = FlowKind::Custom;
  flow.streamfunction_ = streamfunction;
  flow.velocity_ = perp_gradient(streamfunction);
  flow.finish();
  return flow;
}

FourierField default_cellular_streamfunction() {
  // sin x sin y = (cos(x - y) - cos(x + y)) / 2
  const FieldEntry entries[] = {{{1, -1}, Parity::Cos, 0.5}, {{1, 1}, Parity::Cos, -0.5}};
  return make_trig_field(1, entries);
}

Flow default_cellular_flow() { return make_cellular(default_cellular_streamfunction()); }

std::vector<VelocityMode> velocity_coefficients(const Flow& flow) { return flow.velocity(); }

double spectral_divergence(const Flow& flow) {
  double worst = 0.0;
  for (const auto& v : flow.velocity())
    worst = std::max(worst, std::abs(static_cast<double>(v.mode.k1) * v.ux +
                                     static_cast<double>(v.mode.k2) * v.uy));
  return worst;
}

Eigen::MatrixXd streamfunction_grid(const Flow& flow, Index grid) {
  if (!flow.streamfunction()) throw FlowError("flow has no periodic streamfunction");
  return sample_grid(*flow.streamfunction(), grid);
}

std::string describe(const Flow& flow) {
  std::ostringstream out;
  out << to_string(flow.kind());
  if (flow.profile()) {
    out << " u(y)=";
    bool first = true;
    auto term = [&](double a, const char* fn, std::size_t j) {
      if (a == 0.0) return;
      if (!first) out << '+';
      first = false;
      out << format_double(a) << '*' << fn << '(' << j << "y)";
    };
    for (std::size_t j = 0; j < flow.profile()->cos_coeffs.size(); ++j)
      term(flow.profile()->cos_coeffs[j], "cos", j + 1);
    for (std::size_t j = 0; j < flow.profile()->sin_coeffs.size(); ++j)
      term(flow.profile()->sin_coeffs[j], "sin", j + 1);
  } else {
    out << " modes=" << flow.velocity().size() << " M_u=" << flow.max_wavenumber();
  }
  return out.str();
}

}  // namespace scalarmix
