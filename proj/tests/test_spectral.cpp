#include "scalarmix/spectral.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace scalarmix;
using testing::random_field;
using testing::shear_sin;
using testing::unit_field;

TEST_SUITE("spectral") {
  TEST_CASE("shear spectrum kernel contains every k1 = 0 coefficient") {
    const int n = 8;
    const auto report = spectrum(advection_matrix(shear_sin(), n));
    CHECK(report.kernel_dimension >= 2 * n);
    CHECK(report.max_real_part < 1e-10);
    const auto& v = report.eigenvectors;
    CHECK((v.adjoint() * v - Eigen::MatrixXcd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("zero flow has an all-zero spectrum") {
    const auto zero = OperatorMatrix(OperatorKind::Advection, 3, 0.0, 1.0,
                                     Eigen::MatrixXd::Zero(basis_dimension(3), basis_dimension(3)));
    const auto report = spectrum(zero);
    CHECK(report.frequencies.cwiseAbs().maxCoeff() == 0.0);
    CHECK(report.kernel_dimension == basis_dimension(3));
  }

  TEST_CASE("cellular spectrum: +- pairs, sorted, tiny real parts") {
    const auto report = spectrum(advection_matrix(default_cellular_flow(), 8));
    CHECK(report.max_real_part < 1e-10);
    CHECK(report.max_residual < 1e-10);
    const auto& lam = report.frequencies;
    for (Index i = 1; i < lam.size(); ++i) CHECK(lam[i] >= lam[i - 1]);
    for (Index i = 0; i < lam.size(); ++i) CHECK(std::abs(lam[i] + lam[lam.size() - 1 - i]) < 1e-10);
    CHECK(report.kernel_dimension % 2 == 0);
  }

  TEST_CASE("non-advection input is rejected") {
    CHECK_THROWS(spectrum(dissipation_matrix(3)));
  }

  TEST_CASE("shear E projection keeps exactly k1 = 0") {
    CHECK(shear_E_projection(unit_field(4, {0, 2}, Parity::Sin)).coefficients() ==
          unit_field(4, {0, 2}, Parity::Sin).coefficients());
    CHECK(shear_E_projection(unit_field(4, {3, 1}, Parity::Cos)).is_zero());
    std::mt19937_64 rng(31);
    const auto f = random_field(5, rng);
    const auto e = shear_E_projection(f);
    const double rest = (f.coefficients() - e.coefficients()).squaredNorm();
    CHECK(f.coefficients().squaredNorm() == doctest::Approx(e.coefficients().squaredNorm() + rest));
    CHECK(shear_E_projection(e).coefficients() == e.coefficients());
  }

  TEST_CASE("shear E projection commutes with dissipation and shear advection") {
    const int n = 6;
    const Basis basis(n);
    Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(basis.dimension(), basis.dimension());
    for (Index i = 0; i < basis.dimension(); ++i)
      if (basis.mode(i).k1 == 0) pi(i, i) = 1.0;
    const auto b = advection_matrix(shear_sin(), n).entries();
    const auto d = dissipation_matrix(n).entries();
    CHECK((pi * b - b * pi).norm() < 1e-12);
    CHECK((pi * d - d * pi).norm() < 1e-12);
  }

  TEST_CASE("streamline projection fixes functions of psi and kills orthogonal ones") {
    const int n = 8;
    const Flow cell = default_cellular_flow();
    const FieldEntry psi_entries[] = {{{1, -1}, Parity::Cos, 0.5}, {{1, 1}, Parity::Cos, -0.5}};
    const auto psi = make_trig_field(n, psi_entries);
    const auto p = streamline_projection(cell, psi, 64, 256);
    CHECK((p.field.coefficients() - psi.coefficients()).norm() / psi.l2_norm() <= 0.05);

    // cos x is odd under x -> pi - x, which preserves psi, so its streamline averages vanish
    const auto odd = unit_field(n, {1, 0}, Parity::Cos);
    CHECK(streamline_projection(cell, odd, 64, 256).field.l2_norm() <= 0.05);
    CHECK(streamline_projection(cell, FourierField(n), 64, 256).field.is_zero());
    CHECK_THROWS(streamline_projection(cell, psi, 1, 256));
    CHECK_THROWS(streamline_projection(shear_sin(), psi, 64, 256));
  }

  TEST_CASE("growth probe: invariant modes are flat") {
    const auto f0 = unit_field(6, {0, 2}, Parity::Cos);
    for (auto method : {GrowthMethod::TruncatedExponential, GrowthMethod::ShearExact}) {
      const auto curve = h1_growth_average(shear_sin(), f0, {1.0, 4.0}, method);
      for (double g : curve.values) CHECK(g == doctest::Approx(4.0).epsilon(1e-12));
    }
    CHECK_THROWS(h1_growth_average(shear_sin(), FourierField(4), {1.0}, GrowthMethod::ShearExact));
    CHECK_THROWS(h1_growth_average(default_cellular_flow(), f0, {1.0}, GrowthMethod::ShearExact));
  }

  TEST_CASE("shear exact growth follows 1 + T^2/6") {
    const auto f0 = unit_field(8, {1, 0}, Parity::Cos);
    const std::vector<double> times{0.5, 3.0, 8.0};
    const auto curve = h1_growth_average(shear_sin(), f0, times, GrowthMethod::ShearExact);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double g = 1.0 + times[i] * times[i] / 6.0;
      CHECK(std::abs(curve.values[i] - g) <= 1e-6 * g);
      CHECK(curve.steps[i] <= times[i] / 1000.0 + 1e-15);
    }
  }

  TEST_CASE("shear exact evolution: t = 0, k1 = 0 content, unitarity, H1 identity") {
    const int n = 8;
    const ShearProfile profile{{}, {1.0}};
    std::mt19937_64 rng(32);
    const auto f = random_field(n, rng);
    CHECK(shear_exact_evolution(profile, f, 0.0).coefficients() == f.coefficients());
    const auto ft = shear_exact_evolution(profile, f, 1.3);
    CHECK((shear_E_projection(ft).coefficients() - shear_E_projection(f).coefficients()).norm() < 1e-12);

    const auto g0 = unit_field(n, {1, 0}, Parity::Cos);
    const auto g2 = shear_exact_evolution(profile, g0, 2.0, 16 * n);
    // truncation at N keeps only part of the Bessel tail; compare inside the box
    CHECK(shear_exact_h1_norm2(profile, g0, 2.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(g2.l2_norm() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_THROWS(shear_exact_evolution(profile, g0, 1.0, 8 * n - 1));
  }

  TEST_CASE("truncated exponential matches the shear oracle at N = 32") {
    const auto f0 = unit_field(32, {1, 0}, Parity::Cos);
    const std::vector<double> times{2.0, 10.0};
    const auto exact = h1_growth_average(shear_sin(), f0, times, GrowthMethod::ShearExact);
    const auto trunc = h1_growth_average(shear_sin(), f0, times, GrowthMethod::TruncatedExponential);
    for (std::size_t i = 0; i < times.size(); ++i)
      CHECK(std::abs(trunc.values[i] - exact.values[i]) <= 0.02 * exact.values[i]);
  }

  TEST_CASE("low-mode time average: zero on E, bounded, decaying for shear") {
    const int n = 12;
    CHECK(low_mode_time_average(shear_sin(), unit_field(n, {0, 1}, Parity::Cos), 10.0) == 0.0);
    const auto f0 = unit_field(n, {1, 0}, Parity::Cos);
    const double v5 = low_mode_time_average(shear_sin(), f0, 5.0);
    const double v20 = low_mode_time_average(shear_sin(), f0, 20.0);
    CHECK(v20 < v5);
    CHECK(v5 <= 1.0 + 1e-9);
    std::mt19937_64 rng(33);
    const auto r = random_field(6, rng);
    CHECK(low_mode_time_average(default_cellular_flow(), r, 3.0) <= r.coefficients().squaredNorm() + 1e-9);
  }

  TEST_CASE("CSV exports") {
    GrowthCurve curve;
    curve.times = {1.0};
    curve.values = {1.5};
    std::ostringstream g;
    write_growth_csv(g, curve);
    CHECK(g.str() == "T,G\n1,1.5\n");
    SpectrumReport report;
    report.frequencies = Eigen::VectorXd::Constant(1, -0.25);
    std::ostringstream s;
    write_spectrum_csv(s, report);
    CHECK(s.str() == "index,lambda\n0,-0.25\n");
  }
}
