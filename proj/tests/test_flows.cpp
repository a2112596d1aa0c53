#include "scalarmix/flows.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

using namespace scalarmix;

namespace {
std::complex<double> velocity_at(const Flow& flow, ModeIndex k, bool x_component) {
  for (const auto& m : velocity_coefficients(flow))
    if (m.mode == k) return x_component ? m.ux : m.uy;
  return 0.0;
}
}  // namespace

TEST_SUITE("flows") {
  TEST_CASE("shear sin y has velocity support (0,+-1) and Lipschitz bound 1") {
    const Flow flow = testing::shear_sin();
    CHECK(flow.kind() == FlowKind::Shear);
    CHECK(flow.lipschitz_bound() == doctest::Approx(1.0));
    const auto ux_plus = velocity_at(flow, {0, 1}, true);
    const auto ux_minus = velocity_at(flow, {0, -1}, true);
    CHECK(ux_plus.real() == doctest::Approx(0.0));
    CHECK(ux_plus.imag() == doctest::Approx(-0.5));
    CHECK(ux_minus.imag() == doctest::Approx(0.5));
    for (const auto& m : velocity_coefficients(flow)) {
      CHECK(m.mode.k1 == 0);
      CHECK(std::abs(m.uy) == 0.0);
    }
  }

  TEST_CASE("shear derivative zeros are finite") {
    const Flow flow = make_shear(ShearProfile{{1.0, 1.0}, {}});
    CHECK(flow.nondegenerate());
    CHECK(flow.shear_derivative_zeros() > 0);
    CHECK(flow.shear_derivative_zeros() < 10);
    CHECK_THROWS_AS(make_shear(ShearProfile{{0.0}, {}}), FlowError);
  }

  TEST_CASE("cellular sin x sin y matches hand differentiation") {
    const Flow flow = default_cellular_flow();
    for (double x : {0.3, 1.7, 4.0})
      for (double y : {0.1, 2.5, 5.9}) {
        const auto [ux, uy] = flow.evaluate(x, y);
        CHECK(ux == doctest::Approx(-std::sin(x) * std::cos(y)));
        CHECK(uy == doctest::Approx(std::cos(x) * std::sin(y)));
      }
    int modes = 0;
    for (const auto& m : velocity_coefficients(flow)) {
      CHECK(std::abs(m.mode.k1) == 1);
      CHECK(std::abs(m.mode.k2) == 1);
      ++modes;
    }
    CHECK(modes == 4);
    CHECK_THROWS_AS(make_cellular(FourierField(2)), FlowError);
  }

  TEST_CASE("the cell center (pi/2, pi/2) is a critical point of psi") {
    const Flow flow = default_cellular_flow();
    const auto [ux, uy] = flow.evaluate(std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    CHECK(std::hypot(ux, uy) < 1e-14);
  }

  TEST_CASE("spectral divergence vanishes for random streamfunctions") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const Flow flow = make_custom(testing::random_field(3, rng));
      CHECK(spectral_divergence(flow) == 0.0);
      CHECK(std::abs(velocity_at(flow, {0, 0}, true)) == 0.0);
    }
  }

  TEST_CASE("Lipschitz bound dominates the sampled velocity gradient") {
    std::mt19937_64 rng(12);
    const Flow flow = make_custom(testing::random_field(2, rng));
    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        const double x = 0.31 * i, y = 0.29 * j;
        const auto [a, b] = flow.evaluate(x, y);
        const auto [ax, bx] = flow.evaluate(x + h, y);
        const auto [ay, by] = flow.evaluate(x, y + h);
        const Eigen::Matrix2d jac{{(ax - a) / h, (ay - a) / h}, {(bx - b) / h, (by - b) / h}};
        const double g = Eigen::JacobiSVD<Eigen::Matrix2d>(jac).singularValues()[0];
        worst = std::max(worst, g);
      }
    CHECK(worst <= flow.lipschitz_bound() * 1.0001);
  }
}
