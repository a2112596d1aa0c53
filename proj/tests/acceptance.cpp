// Acceptance checks, one line per criterion. An optional argument list of
// criterion numbers restricts the run.

#include "scalarmix/covariance.hpp"
#include "scalarmix/flows.hpp"
#include "scalarmix/fourier.hpp"
#include "scalarmix/operators.hpp"
#include "scalarmix/spde.hpp"
#include "scalarmix/spectral.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace scalarmix;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

const std::vector<double> kLadder{0.2, 0.1, 0.05, 0.025, 0.0125};

Flow shear_sin() { return make_shear(ShearProfile{{}, {1.0}}); }

NoiseSpec unit_noise(int n, std::vector<FieldEntry> entries) { return make_noise(n, entries); }

NoiseSpec mixed_noise(int n) {
  return unit_noise(n, {{{0, 1}, Parity::Cos, 1.0}, {{1, 1}, Parity::Cos, 1.0}});
}

FourierField cos_x(int n) {
  const FieldEntry e{{1, 0}, Parity::Cos, 1.0};
  return make_field(n, std::span<const FieldEntry>(&e, 1));
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string list(const std::vector<double>& v) {
  std::ostringstream out;
  out.precision(4);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  return out.str();
}

Outcome h1_balance() {
  double worst = 0.0;
  for (const Flow& flow : {shear_sin(), default_cellular_flow()})
    for (int n : {6, 12})
      for (double nu : {0.2, 0.05}) {
        const auto a = generator(flow, nu, n);
        const auto q = lyapunov_covariance(a, unit_noise(n, {{{1, 1}, Parity::Cos, 1.0}}));
        worst = std::max(worst, std::abs(h1_trace(q) - 0.5));
      }
  return {worst <= 1e-9, "max |tr(Lambda Q) - 1/2| = " + format_double(worst)};
}

Outcome shear_limit() {
  const int n = 12;
  const auto single = unit_noise(n, {{{0, 1}, Parity::Cos, 1.0}});
  const auto q0_single = shear_limit_covariance(single);
  double worst = 0.0;
  for (double nu : kLadder)
    worst = std::max(worst, covariance_distance(lyapunov_covariance(generator(shear_sin(), nu, n), single),
                                                q0_single));
  const auto mixed = mixed_noise(n);
  const auto q0 = shear_limit_covariance(mixed);
  std::vector<double> dist;
  for (double nu : {0.2, 0.1, 0.05, 0.025})
    dist.push_back(covariance_distance(lyapunov_covariance(generator(shear_sin(), nu, n), mixed), q0));
  return {worst < 1e-9 && strictly_decreasing(dist),
          "single-mode max dist " + format_double(worst) + "; mixed dist " + list(dist)};
}

Outcome dirac_limit() {
  const int n = 12;
  const auto mixed = mixed_noise(n);
  std::vector<double> norms;
  for (double nu : {0.2, 0.1, 0.05, 0.025})
    norms.push_back(block_operator_norm(lyapunov_covariance(generator(shear_sin(), nu, n), mixed),
                                        select_k1_nonzero()));
  return {strictly_decreasing(norms) && norms.back() < 0.5 * norms.front(), "k1!=0 block norms " + list(norms)};
}

Outcome oracle_agreement() {
  const int n = 8;
  const double nu = 0.5;
  const auto a = generator(shear_sin(), nu, n);
  const auto noise = mixed_noise(n);
  const auto q = lyapunov_covariance(a, noise);
  const auto quad = covariance_by_quadrature(a, noise, 40.0 / nu, 0.01 / nu);
  const double rel = (q.matrix() - quad.covariance.matrix()).norm() / q.matrix().norm();
  return {rel <= 1e-6, "relative Frobenius distance " + format_double(rel)};
}

Outcome monte_carlo() {
  const int n = 6;
  const auto noise = unit_noise(n, {{{0, 1}, Parity::Cos, 1.0}});
  SimConfig config{shear_sin(), 0.1, noise};
  config.scheme = Scheme::ExactGaussian;
  config.dt = 0.5;
  config.burn_in = default_burn_in(config.nu);
  config.horizon = 100.0;
  config.members = 2000;
  config.sample_every = 20;
  config.seed = 20240611;
  const auto stats = simulate(config, FourierField(n));
  const auto q = empirical_covariance(stats);
  const Index i = Basis(n).index({0, 1}, Parity::Cos);
  const double entry = q.matrix()(i, i);
  const auto balance = energy_balance_residual(stats, config.burn_in, config.horizon);
  const bool ok = stats.accumulator.count() >= 10000 && std::abs(entry - 0.5) <= 0.025 &&
                  std::abs(balance.residual) <= 5.0 * balance.standard_error;
  return {ok, "samples " + std::to_string(stats.accumulator.count()) + ", Q(cos y) = " + format_double(entry) +
                  ", residual " + format_double(balance.residual) + " (se " +
                  format_double(balance.standard_error) + ")"};
}

Outcome inviscid_growth() {
  const std::vector<double> times{1.0, 2.0, 5.0, 10.0};
  const auto exact = h1_growth_average(shear_sin(), cos_x(8), times, GrowthMethod::ShearExact);
  double exact_err = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double g = 1.0 + times[i] * times[i] / 6.0;
    exact_err = std::max(exact_err, std::abs(exact.values[i] - g) / g);
  }
  const auto truncated = h1_growth_average(shear_sin(), cos_x(32), times, GrowthMethod::TruncatedExponential);
  double trunc_err = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i)
    trunc_err = std::max(trunc_err, std::abs(truncated.values[i] - exact.values[i]) / exact.values[i]);

  const int n = 16;
  const Flow cell = default_cellular_flow();
  const FieldEntry entries[] = {{{1, 0}, Parity::Cos, 1.0}, {{0, 2}, Parity::Sin, 0.5}};
  const FourierField raw = make_field(n, entries);
  const auto pi = streamline_projection(cell, raw, 64, 256);
  const FourierField f0(n, raw.coefficients() - pi.field.coefficients());
  const auto cellular = h1_growth_average(cell, f0, {1.0, 10.0}, GrowthMethod::TruncatedExponential);
  const bool ok = exact_err <= 1e-6 && trunc_err <= 0.02 && cellular.values[1] > cellular.values[0];
  return {ok, "shear-exact rel err " + format_double(exact_err) + ", truncated rel err " +
                  format_double(trunc_err) + ", cellular G(1)=" + format_double(cellular.values[0]) +
                  " G(10)=" + format_double(cellular.values[1])};
}

Outcome rage_decay() {
  const FourierField f0 = cos_x(16);
  const double v10 = low_mode_time_average(shear_sin(), f0, 10.0);
  const double v100 = low_mode_time_average(shear_sin(), f0, 100.0);
  const double norm2 = f0.l2_norm() * f0.l2_norm();
  return {v100 < v10 && v10 < norm2, "T=10: " + format_double(v10) + ", T=100: " + format_double(v100)};
}

Outcome dissipation_probe() {
  const int n = 32;
  const double tau = 1.0;
  std::vector<double> norms;
  for (double nu : {0.1, 0.03, 0.01, 0.003})
    norms.push_back(semigroup_norm(generator(default_cellular_flow(), nu, n), tau / nu));
  bool ok = true;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    ok = ok && norms[i] < std::exp(-tau) + 1e-8;
    if (i > 0) ok = ok && norms[i] <= norms[i - 1];
  }
  return {ok, "||S(tau/nu)|| " + list(norms)};
}

Outcome cellular_support() {
  const int n = 16;
  std::vector<FieldEntry> entries;
  for (ModeIndex k : {ModeIndex{0, 1}, ModeIndex{1, 0}, ModeIndex{1, 1}, ModeIndex{1, -1}})
    for (Parity p : {Parity::Cos, Parity::Sin}) entries.push_back({k, p, 1.0});
  const auto noise = make_noise(n, entries);
  const Flow cell = default_cellular_flow();
  std::vector<double> deviation;
  for (double nu : kLadder) {
    const auto q = lyapunov_covariance(generator(cell, nu, n), noise);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.matrix());
    const FourierField v(n, eig.eigenvectors().col(q.dimension() - 1));
    const auto pi = streamline_projection(cell, v, 64, 256);
    deviation.push_back((v.coefficients() - pi.field.coefficients()).norm() / v.l2_norm());
  }
  return {strictly_decreasing(deviation) && deviation.back() < 0.2, "deviation " + list(deviation)};
}

Outcome structural_suite() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  auto random_field = [&](int n) {
    Eigen::VectorXd c(basis_dimension(n));
    for (Index i = 0; i < c.size(); ++i) c[i] = normal(rng);
    return FourierField(n, c);
  };
  std::vector<std::string> failures;
  const int n = 8;
  for (const Flow& flow : {shear_sin(), default_cellular_flow()}) {
    const auto b = advection_matrix(flow, n);
    if ((b.entries() + b.entries().transpose()).cwiseAbs().maxCoeff() > 1e-12) failures.push_back("skewness");
    const auto f = random_field(n);
    if (std::abs(inner_product(FourierField(n, b.entries() * f.coefficients()), f)) > 1e-12 * f.l2_norm() *
                                                                                           f.l2_norm() * 10)
      failures.push_back("<Bf,f>");
    const auto a0 = generator(flow, 0.0, n);
    const auto g = semigroup_apply(a0, 5.0, f);
    if (std::abs(g.l2_norm() - f.l2_norm()) > 1e-10 * f.l2_norm()) failures.push_back("unitarity");
    for (double nu : {0.2, 0.05}) {
      const auto q = lyapunov_covariance(generator(flow, nu, n), mixed_noise(n));
      if (q.min_eigenvalue() < -1e-10 * q.operator_norm()) failures.push_back("psd");
      if (q.operator_norm() > 2.0 / 2.0 + 1e-12) failures.push_back("norm bound");
    }
  }
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = random_field(n);
    const auto grid = sample_grid(f, 2 * n + 2);
    const double h = 2.0 * M_PI / static_cast<double>(grid.rows());
    if (std::abs(h * h * grid.squaredNorm() - f.coefficients().squaredNorm()) >
        1e-10 * f.coefficients().squaredNorm())
      failures.push_back("parseval");
    const auto p = project_low(f, 3);
    if ((project_low(p, 3).coefficients() - p.coefficients()).norm() != 0.0) failures.push_back("idempotence");
    const auto e = shear_E_projection(f);
    if ((shear_E_projection(e).coefficients() - e.coefficients()).norm() != 0.0)
      failures.push_back("E idempotence");
  }
  std::string detail = failures.empty() ? "all invariants hold" : "violations:";
  for (const auto& f : failures) detail += " " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"exact H1 balance", h1_balance},
      {"shear limit covariance", shear_limit},
      {"Dirac-limit diagnostic", dirac_limit},
      {"Lyapunov/quadrature agreement", oracle_agreement},
      {"Monte Carlo consistency", monte_carlo},
      {"inviscid H1 growth", inviscid_growth},
      {"RAGE-style decay", rage_decay},
      {"enhanced dissipation probe", dissipation_probe},
      {"cellular support structure", cellular_support},
      {"structural invariant suite", structural_suite},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome{false, ""};
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", number, criteria[i].first,
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
    if (!outcome.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
