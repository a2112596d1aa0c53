#include "scalarmix/spde.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace scalarmix;
using testing::shear_sin;
using testing::unit_field;

namespace {

NoiseSpec noise_on(int n, std::vector<FieldEntry> entries) { return make_noise(n, entries); }

SimConfig base_config(int n, double nu, NoiseSpec noise) {
  SimConfig c{shear_sin(), nu, std::move(noise)};
  c.dt = 0.5;
  c.horizon = 5.0;
  c.members = 8;
  c.seed = 99;
  return c;
}

}  // namespace

TEST_SUITE("spde") {
  TEST_CASE("config validation") {
    auto c = base_config(3, 0.1, noise_on(3, {}));
    CHECK_NOTHROW(c.validate());
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(), SimulationError);
    c = base_config(3, 0.1, noise_on(3, {}));
    c.burn_in = 5.0;
    CHECK_THROWS_AS(c.validate(), SimulationError);
    c = base_config(3, 0.1, noise_on(3, {}));
    c.members = 0;
    CHECK_THROWS_AS(c.validate(), SimulationError);
    c = base_config(3, 0.1, noise_on(3, {}));
    c.horizon = 1.3;
    CHECK_THROWS_AS(c.validate(), SimulationError);
    CHECK(parse_scheme("exact-gaussian") == Scheme::ExactGaussian);
    CHECK(parse_scheme(to_string(Scheme::SemiImplicitEM)) == Scheme::SemiImplicitEM);
    CHECK_THROWS(parse_scheme("rk4"));
    CHECK(default_burn_in(0.1) == doctest::Approx(50.0));
  }

  TEST_CASE("moment accumulator merge equals sequential accumulation") {
    std::mt19937_64 rng(51);
    std::normal_distribution<double> normal;
    MomentAccumulator all(3), left(3), right(3);
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd x(3);
      x << normal(rng), 2.0 * normal(rng) + 1.0, normal(rng) * normal(rng);
      all.add(x);
      (i % 3 == 0 ? left : right).add(x);
    }
    MomentAccumulator merged = left;
    merged.merge(right);
    CHECK(merged.count() == all.count());
    CHECK((merged.mean() - all.mean()).norm() < 1e-12);
    CHECK((merged.covariance() - all.covariance()).norm() < 1e-12);
    CHECK((merged.skewness() - all.skewness()).norm() < 1e-9);
    CHECK((merged.covariance() - merged.covariance().transpose()).norm() == 0.0);
    MomentAccumulator single(2);
    single.add(Eigen::Vector2d(1.0, 2.0));
    CHECK_THROWS(single.covariance());
  }

  TEST_CASE("noiseless semi-implicit stepping contracts") {
    const int n = 4;
    auto c = base_config(n, 0.5, noise_on(n, {}));
    c.scheme = Scheme::SemiImplicitEM;
    c.dt = 0.01;
    c.horizon = 2.0;
    c.members = 1;
    std::mt19937_64 rng(52);
    const auto stats = simulate(c, testing::random_field(n, rng));
    for (Index i = 1; i < stats.l2.cols(); ++i) CHECK(stats.l2(0, i) <= stats.l2(0, i - 1));
  }

  TEST_CASE("noiseless semi-implicit stepping converges to the exact semigroup") {
    const int n = 5;
    std::mt19937_64 rng(53);
    const auto f0 = testing::random_field(n, rng);
    const auto exact = semigroup_apply(generator(default_cellular_flow(), 0.2, n), 1.0, f0);
    std::vector<double> errors;
    for (double dt : {0.01, 0.005}) {
      SimConfig c{default_cellular_flow(), 0.2, noise_on(n, {})};
      c.scheme = Scheme::SemiImplicitEM;
      c.dt = dt;
      c.horizon = 1.0;
      c.burn_in = 0.5;
      c.sample_every = static_cast<Index>(std::llround(1.0 / dt));
      c.members = 1;
      const auto stats = simulate(c, f0);
      REQUIRE(stats.accumulator.count() == 1);
      errors.push_back((stats.accumulator.mean() - exact.coefficients()).norm() / f0.l2_norm());
    }
    CHECK(errors[0] < 0.05);
    CHECK(errors[0] / errors[1] >= 1.8);
  }

  TEST_CASE("zero noise from zero data gives a zero covariance") {
    const int n = 3;
    auto c = base_config(n, 0.2, noise_on(n, {}));
    c.burn_in = 1.0;
    const auto q = empirical_covariance(simulate(c, FourierField(n)));
    CHECK(q.matrix().isZero(0.0));
    CHECK(q.provenance().source == CovarianceSource::Empirical);
    c.members = 1;
    c.burn_in = 4.6;
    c.horizon = 5.0;
    CHECK_THROWS_AS(empirical_covariance(simulate(c, FourierField(n))), SimulationError);
  }

  TEST_CASE("identical seeds reproduce identical statistics, independent of threads") {
    const int n = 3;
    for (auto scheme : {Scheme::ExactGaussian, Scheme::SemiImplicitEM}) {
      auto c = base_config(n, 0.3, noise_on(n, {{{0, 1}, Parity::Cos, 1.0}, {{1, 1}, Parity::Sin, 1.0}}));
      c.scheme = scheme;
      c.members = 130;
      c.burn_in = 1.0;
      const auto a = simulate(c, FourierField(n));
      c.threads = 3;
      const auto b = simulate(c, FourierField(n));
      CHECK(a.l2 == b.l2);
      CHECK(a.h1 == b.h1);
      CHECK(a.accumulator.covariance() == b.accumulator.covariance());
      c.seed += 1;
      const auto other = simulate(c, FourierField(n));
      CHECK(other.l2 != a.l2);
    }
  }

  TEST_CASE("single forced heat mode: Ornstein-Uhlenbeck law, H1 level, Gaussianity") {
    const int n = 3;
    auto c = base_config(n, 0.5, noise_on(n, {{{0, 1}, Parity::Cos, 1.0}}));
    c.dt = 1.0;
    c.burn_in = default_burn_in(c.nu);
    c.horizon = 20.0;
    c.sample_every = 2;
    c.members = 20000;
    const auto stats = simulate(c, FourierField(n));
    const Index i = Basis(n).index({0, 1}, Parity::Cos);
    const double samples = static_cast<double>(stats.accumulator.count());
    CHECK(samples >= 1e5);
    const double var = stats.accumulator.covariance()(i, i);
    CHECK(std::abs(var - 0.5) <= 3.0 * 0.5 * std::sqrt(2.0 / samples) * 1.2);
    CHECK(std::abs(stats.accumulator.skewness()[i]) < 0.1);
    CHECK(std::abs(stats.accumulator.excess_kurtosis()[i]) < 0.2);
    const Eigen::VectorXd h1 = stats.mean_h1();
    CHECK(h1[h1.size() - 1] == doctest::Approx(0.5).epsilon(0.05));
    CHECK(exceedance_fraction(stats, 5.0 * 1.0 / c.nu) < 0.01);
    const auto balance = energy_balance_residual(stats, c.burn_in, c.horizon);
    CHECK(std::abs(balance.residual) <= 5.0 * balance.standard_error);
  }

  TEST_CASE("shear with mixed forcing matches the Lyapunov covariance") {
    const int n = 3;
    const auto noise = noise_on(n, {{{0, 1}, Parity::Cos, 1.0}, {{1, 0}, Parity::Cos, 1.0}});
    auto c = base_config(n, 0.5, noise);
    c.dt = 1.0;
    c.burn_in = 10.0;
    c.horizon = 30.0;
    c.sample_every = 4;
    c.members = 4000;
    const auto stats = simulate(c, FourierField(n));
    const auto q = lyapunov_covariance(generator(shear_sin(), c.nu, n), noise);
    const Eigen::MatrixXd diff = empirical_covariance(stats).matrix() - q.matrix();
    // entrywise standard error of a Gaussian covariance estimate
    const Eigen::VectorXd d = q.matrix().diagonal();
    const double samples = static_cast<double>(stats.accumulator.count());
    double se2 = 0.0;
    for (Index a = 0; a < d.size(); ++a)
      for (Index b = 0; b < d.size(); ++b)
        se2 += (d[a] * d[b] + q.matrix()(a, b) * q.matrix()(a, b)) / samples;
    CHECK(diff.norm() <= 5.0 * std::sqrt(se2));
  }

  TEST_CASE("semi-implicit scheme approaches the exact law as dt shrinks") {
    const int n = 2;
    const auto noise = noise_on(n, {{{0, 1}, Parity::Cos, 1.0}});
    const Index i = Basis(n).index({0, 1}, Parity::Cos);
    auto c = base_config(n, 1.0, noise);
    c.scheme = Scheme::SemiImplicitEM;
    c.dt = 0.025;
    c.burn_in = 5.0;
    c.horizon = 10.0;
    c.sample_every = 40;
    c.members = 8000;
    const auto stats = simulate(c, FourierField(n));
    const double var = stats.accumulator.covariance()(i, i);
    // implicit Euler variance bias is a factor 1/(1 + nu dt / 2)
    const double se = 0.5 * std::sqrt(2.0 / static_cast<double>(stats.accumulator.count()));
    CHECK(std::abs(var - 0.5 / (1.0 + 0.0125)) <= 4.0 * se);
    CHECK(std::abs(var - 0.5) <= 0.02);
  }

  TEST_CASE("deterministic energy balance residual is first order in dt") {
    const int n = 3;
    std::vector<double> residuals;
    for (double dt : {0.1, 0.05, 0.025}) {
      auto c = base_config(n, 0.5, noise_on(n, {}));
      c.scheme = Scheme::SemiImplicitEM;
      c.dt = dt;
      c.horizon = 2.0;
      c.members = 1;
      const auto stats = simulate(c, unit_field(n, {0, 1}, Parity::Cos));
      residuals.push_back(std::abs(energy_balance_residual(stats, 0.0, 2.0).residual));
    }
    CHECK(residuals[0] / residuals[1] >= 1.8);
    CHECK(residuals[1] / residuals[2] >= 1.8);
    auto c = base_config(n, 0.5, noise_on(n, {}));
    const auto stats = simulate(c, unit_field(n, {0, 1}, Parity::Cos));
    CHECK_THROWS(energy_balance_residual(stats, 0.25, 2.0));
    CHECK_THROWS(energy_balance_residual(stats, 2.0, 1.0));
  }

  TEST_CASE("blow-up is detected and reported") {
    const int n = 8;
    SimConfig c{default_cellular_flow(), 0.0, noise_on(n, {})};
    c.scheme = Scheme::SemiImplicitEM;
    c.dt = 10.0;
    c.horizon = 200.0;
    try {
      simulate(c, unit_field(n, {1, 0}, Parity::Cos));
      CHECK(false);
    } catch (const SimulationError& e) {
      CHECK(std::string(e.what()).find("instability") != std::string::npos);
    }
  }

  TEST_CASE("stats CSV layout") {
    const int n = 2;
    auto c = base_config(n, 0.5, noise_on(n, {{{0, 1}, Parity::Cos, 1.0}}));
    c.horizon = 1.0;
    std::ostringstream out;
    write_stats_csv(out, simulate(c, FourierField(n)));
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "t,mean_l2,mean_h1,residual");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 3);
  }
}
