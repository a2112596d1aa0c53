#include "scalarmix/spde.hpp"

#include "scalarmix/linalg.hpp"
#include "scalarmix/operators.hpp"
#include "scalarmix/parallel.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace scalarmix {

namespace {

constexpr Index kChunk = 64;
constexpr double kBlowupFactor = 1e6;
constexpr double kIncrementTolerance = 1e-10;

std::mt19937_64 member_stream(std::uint64_t seed, Index member) {
  const auto m = static_cast<std::uint64_t>(member);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(m >> 32)};
  return std::mt19937_64(seq);
}

/// One coupling block of the exact Gaussian step: f_b <- E_b f_b + L_b xi.
struct GaussianBlock {
  std::vector<Index> indices;
  Eigen::MatrixXd noise_factor;  // |block| x rank
};

/// nu int_0^dt e^{sA} C e^{sA^T} ds on one block by composite Simpson with
/// interval doubling until the relative change is below kIncrementTolerance.
Eigen::MatrixXd increment_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& forcing_columns, double nu,
                                     double dt) {
  Eigen::MatrixXd previous;
  for (Index intervals = 8; intervals <= (Index{1} << 22); intervals *= 2) {
    const double h = dt / static_cast<double>(intervals);
    const Eigen::MatrixXd step = dense_expm(a, h);
    Eigen::MatrixXd x = forcing_columns;
    Eigen::MatrixXd sum = x * x.transpose();
    for (Index i = 1; i <= intervals; ++i) {
      x = step * x;
      const double w = i == intervals ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      sum.noalias() += w * x * x.transpose();
    }
    Eigen::MatrixXd current = nu * h / 3.0 * sum;
    if (previous.size() > 0 && (current - previous).norm() <= kIncrementTolerance * current.norm())
      return current;
    previous = std::move(current);
  }
  return previous;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sigma + sigma.transpose()));
  const double cutoff = 1e-14 * std::max(1e-300, eig.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<Index> kept;
  for (Index j = 0; j < eig.eigenvalues().size(); ++j)
    if (eig.eigenvalues()[j] > cutoff) kept.push_back(j);
  Eigen::MatrixXd factor(sigma.rows(), static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j)
    factor.col(static_cast<Index>(j)) = eig.eigenvectors().col(kept[j]) * std::sqrt(eig.eigenvalues()[kept[j]]);
  return factor;
}

Index time_index(const TrajectoryStats& stats, double t) {
  const double spacing = stats.times.size() > 1 ? stats.times[1] - stats.times[0] : 1.0;
  for (std::size_t i = 0; i < stats.times.size(); ++i)
    if (std::abs(stats.times[i] - t) <= 1e-9 * std::max(1.0, spacing)) return static_cast<Index>(i);
  throw SimulationError("time " + format_double(t) + " is not a recorded sample time");
}

}  // namespace

std::string to_string(Scheme scheme) {
  return scheme == Scheme::ExactGaussian ? "exact-gaussian" : "semi-implicit-em";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "exact-gaussian" || name == "ExactGaussian") return Scheme::ExactGaussian;
  if (name == "semi-implicit-em" || name == "SemiImplicitEM") return Scheme::SemiImplicitEM;
  throw SimulationError("unknown scheme '" + name + "'");
}

double default_burn_in(double nu) { return 5.0 / nu; }

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw SimulationError("dt must be positive");
  if (!(burn_in >= 0.0) || !(horizon > burn_in)) throw SimulationError("need horizon > burn_in >= 0");
  if (members < 1) throw SimulationError("ensemble size must be at least 1");
  if (!(nu >= 0.0)) throw SimulationError("nu must be nonnegative");
  if (record_every < 1 || sample_every < 1) throw SimulationError("record/sample strides must be positive");
  const double ratio = horizon / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw SimulationError("horizon must be an integer multiple of dt");
}

Index SimConfig::steps() const { return static_cast<Index>(std::llround(horizon / dt)); }

MomentAccumulator::MomentAccumulator(Index dimension)
    : mean_(Eigen::VectorXd::Zero(dimension)),
      comoment_(Eigen::MatrixXd::Zero(dimension, dimension)),
      sum1_(Eigen::VectorXd::Zero(dimension)),
      sum2_(Eigen::VectorXd::Zero(dimension)),
      sum3_(Eigen::VectorXd::Zero(dimension)),
      sum4_(Eigen::VectorXd::Zero(dimension)) {}

void MomentAccumulator::add(const Eigen::VectorXd& x) {
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  comoment_.noalias() += delta * (x - mean_).transpose();
  const Eigen::ArrayXd a = x.array();
  sum1_.array() += a;
  sum2_.array() += a.square();
  sum3_.array() += a.cube();
  sum4_.array() += a.square().square();
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const Eigen::VectorXd delta = other.mean_ - mean_;
  mean_ += delta * (nb / n);
  comoment_ += other.comoment_ + (na * nb / n) * delta * delta.transpose();
  count_ += other.count_;
  sum1_ += other.sum1_;
  sum2_ += other.sum2_;
  sum3_ += other.sum3_;
  sum4_ += other.sum4_;
}

Eigen::MatrixXd MomentAccumulator::covariance() const {
  if (count_ < 2) throw SimulationError("empirical covariance needs at least 2 samples");
  const Eigen::MatrixXd c = comoment_ / static_cast<double>(count_ - 1);
  return 0.5 * (c + c.transpose());
}

Eigen::VectorXd MomentAccumulator::skewness() const {
  const double n = static_cast<double>(count_);
  const Eigen::ArrayXd mu = sum1_.array() / n;
  const Eigen::ArrayXd m2 = sum2_.array() / n - mu.square();
  const Eigen::ArrayXd m3 = sum3_.array() / n - 3.0 * mu * sum2_.array() / n + 2.0 * mu.cube();
  Eigen::VectorXd out(mu.size());
  for (Index i = 0; i < mu.size(); ++i)
    out[i] = m2[i] > 0.0 ? m3[i] / std::pow(m2[i], 1.5) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Eigen::VectorXd MomentAccumulator::excess_kurtosis() const {
  const double n = static_cast<double>(count_);
  const Eigen::ArrayXd mu = sum1_.array() / n;
  const Eigen::ArrayXd s2 = sum2_.array() / n;
  const Eigen::ArrayXd m2 = s2 - mu.square();
  const Eigen::ArrayXd m4 = sum4_.array() / n - 4.0 * mu * sum3_.array() / n + 6.0 * mu.square() * s2 -
                            3.0 * mu.square().square();
  Eigen::VectorXd out(mu.size());
  for (Index i = 0; i < mu.size(); ++i)
    out[i] = m2[i] > 0.0 ? m4[i] / (m2[i] * m2[i]) - 3.0 : std::numeric_limits<double>::quiet_NaN();
  return out;
}

TrajectoryStats simulate(const SimConfig& config, const FourierField& f0) {
  config.validate();
  const int n = config.noise.truncation();
  if (f0.truncation() != n) throw SimulationError("initial field and noise truncation differ");
  const Index dim = basis_dimension(n);
  const Index steps = config.steps();
  const double dt = config.dt;
  const double nu = config.nu;
  const Eigen::VectorXd& psi = config.noise.amplitudes();
  const Eigen::VectorXd k2 = Basis(n).wavenumbers2();
  const std::vector<Index> forced = config.noise.forced_indices();

  const OperatorMatrix a = generator(config.flow, nu, n, config.s);

  // exact Gaussian step pieces
  std::optional<StepPropagator> propagator;
  std::vector<GaussianBlock> gaussian_blocks;
  // semi-implicit step pieces
  Eigen::SparseMatrix<double> advection;
  Eigen::VectorXd implicit_scale;

  if (config.scheme == Scheme::ExactGaussian) {
    propagator.emplace(a, dt);
    for (const auto& block : a.blocks()) {
      Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(static_cast<Index>(block.size()), 0);
      std::vector<Index> local;
      for (std::size_t i = 0; i < block.size(); ++i)
        if (psi[block[i]] != 0.0) local.push_back(static_cast<Index>(i));
      if (local.empty() || nu == 0.0) continue;
      columns = Eigen::MatrixXd::Zero(static_cast<Index>(block.size()), static_cast<Index>(local.size()));
      for (std::size_t j = 0; j < local.size(); ++j)
        columns(local[j], static_cast<Index>(j)) = psi[block[static_cast<std::size_t>(local[j])]];
      const Eigen::MatrixXd sigma = increment_covariance(gather(a.entries(), block, block), columns, nu, dt);
      gaussian_blocks.push_back({block, psd_factor(sigma)});
    }
  } else {
    // off-diagonal part of A is exactly -B; the diagonal is the implicit dissipation
    Eigen::MatrixXd explicit_part = a.entries();
    explicit_part.diagonal().setZero();
    advection = explicit_part.sparseView();
    const Eigen::VectorXd diss = dissipation_matrix(n, config.s).entries().diagonal();
    implicit_scale = (1.0 - dt * nu * diss.array()).inverse().matrix();
  }

  const double stationary_scale = std::sqrt(config.noise.intensity() / 2.0);
  const double blowup = kBlowupFactor * std::max({f0.l2_norm(), stationary_scale, 1e-300});

  std::vector<double> times;
  for (Index i = 0; i <= steps; i += config.record_every) times.push_back(static_cast<double>(i) * dt);
  const auto records = static_cast<Index>(times.size());

  TrajectoryStats stats;
  stats.truncation = n;
  stats.scheme = config.scheme;
  stats.nu = nu;
  stats.dt = dt;
  stats.burn_in = config.burn_in;
  stats.noise_intensity = config.noise.intensity();
  stats.rng_algorithm = "mt19937_64 per member, seed_seq(seed, member); normal_distribution";
  stats.times = times;
  stats.l2.resize(config.members, records);
  stats.h1.resize(config.members, records);

  const Index chunks = (config.members + kChunk - 1) / kChunk;
  std::vector<MomentAccumulator> partial(static_cast<std::size_t>(chunks), MomentAccumulator(dim));
  const double noise_scale = std::sqrt(nu * dt);

  parallel_for(static_cast<std::size_t>(chunks), config.threads, [&](std::size_t chunk) {
    MomentAccumulator& acc = partial[chunk];
    const Index first = static_cast<Index>(chunk) * kChunk;
    const Index last = std::min(config.members, first + kChunk);
    for (Index member = first; member < last; ++member) {
      std::mt19937_64 rng = member_stream(config.seed, member);
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::VectorXd v = f0.coefficients();
      Index record = 0;
      auto observe = [&](Index step) {
        if (step % config.record_every == 0) {
          stats.l2(member, record) = v.squaredNorm();
          stats.h1(member, record) = (v.array().square() * k2.array()).sum();
          ++record;
        }
        const double t = static_cast<double>(step) * dt;
        if (step > 0 && t >= config.burn_in - 1e-9 * dt && step % config.sample_every == 0) acc.add(v);
      };
      observe(0);
      for (Index step = 1; step <= steps; ++step) {
        if (config.scheme == Scheme::ExactGaussian) {
          v = propagator->apply(v);
          for (const auto& gb : gaussian_blocks) {
            Eigen::VectorXd xi(gb.noise_factor.cols());
            for (Index j = 0; j < xi.size(); ++j) xi[j] = normal(rng);
            const Eigen::VectorXd eta = gb.noise_factor * xi;
            for (std::size_t i = 0; i < gb.indices.size(); ++i) v[gb.indices[i]] += eta[static_cast<Index>(i)];
          }
        } else {
          Eigen::VectorXd rhs = v + dt * (advection * v);
          for (Index i : forced) rhs[i] += noise_scale * psi[i] * normal(rng);
          v = rhs.cwiseProduct(implicit_scale);
        }
        if (!std::isfinite(v.norm()) || v.norm() > blowup)
          throw SimulationError("instability: ||f|| = " + format_double(v.norm()) + " exceeds " +
                                format_double(blowup) + " at t = " + format_double(step * dt) + " (member " +
                                std::to_string(member) + ")");
        observe(step);
      }
    }
  });

  stats.accumulator = MomentAccumulator(dim);
  for (const auto& p : partial) stats.accumulator.merge(p);
  return stats;
}

CovarianceOperator empirical_covariance(const TrajectoryStats& stats) {
  if (stats.accumulator.count() < 2) throw SimulationError("empirical covariance needs at least 2 samples");
  CovarianceProvenance provenance;
  provenance.source = CovarianceSource::Empirical;
  provenance.nu = stats.nu;
  provenance.step = stats.dt;
  provenance.samples = stats.accumulator.count();
  return CovarianceOperator(stats.truncation, stats.accumulator.covariance(), provenance);
}

EnergyBalance energy_balance_residual(const TrajectoryStats& stats, double tau, double t) {
  if (!(tau < t)) throw SimulationError("energy balance needs tau < t");
  const Index i0 = time_index(stats, tau);
  const Index i1 = time_index(stats, t);
  const Index members = stats.members();
  Eigen::VectorXd per_member(members);
  for (Index m = 0; m < members; ++m) {
    double integral = 0.0;
    for (Index i = i0; i < i1; ++i)
      integral += 0.5 * (stats.h1(m, i) + stats.h1(m, i + 1)) *
                  (stats.times[static_cast<std::size_t>(i + 1)] - stats.times[static_cast<std::size_t>(i)]);
    per_member[m] = stats.l2(m, i1) + 2.0 * stats.nu * integral - stats.l2(m, i0) -
                    stats.nu * stats.noise_intensity * (t - tau);
  }
  const double mean = per_member.mean();
  double se = 0.0;
  if (members > 1) {
    const double var = (per_member.array() - mean).square().sum() / static_cast<double>(members - 1);
    se = std::sqrt(var / static_cast<double>(members));
  }
  return {mean, se};
}

double exceedance_fraction(const TrajectoryStats& stats, double threshold) {
  Index total = 0;
  Index above = 0;
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    if (stats.times[i] < stats.burn_in) continue;
    for (Index m = 0; m < stats.members(); ++m) {
      ++total;
      if (stats.l2(m, static_cast<Index>(i)) > threshold) ++above;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(total);
}

void write_stats_csv(std::ostream& out, const TrajectoryStats& stats) {
  out << "t,mean_l2,mean_h1,residual\n";
  const Eigen::VectorXd l2 = stats.mean_l2();
  const Eigen::VectorXd h1 = stats.mean_h1();
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    out << format_double(stats.times[i]) << ',' << format_double(l2[static_cast<Index>(i)]) << ','
        << format_double(h1[static_cast<Index>(i)]) << ',';
    if (i == 0)
      out << format_double(0.0);
    else
      out << format_double(energy_balance_residual(stats, stats.times[0], stats.times[i]).residual);
    out << '\n';
  }
}

}  // namespace scalarmix
