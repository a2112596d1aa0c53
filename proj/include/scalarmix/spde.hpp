#pragma once

// Monte Carlo integration of the truncated forced passive-scalar system
//     df + (u.grad f + nu (-Delta)^s f) dt = sqrt(nu) Psi dW
// and its empirical stationary statistics.

#include "scalarmix/covariance.hpp"
#include "scalarmix/flows.hpp"
#include "scalarmix/fourier.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace scalarmix {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { SemiImplicitEM, ExactGaussian };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct SimConfig {
  Flow flow;
  double nu;
  NoiseSpec noise;
  Scheme scheme = Scheme::ExactGaussian;
  double dt = 0.1;
  double horizon = 1.0;
  double burn_in = 0.0;
  Index members = 1;
  std::uint64_t seed = 0;
  double s = 1.0;
  /// Record ||f||^2 series every this many steps.
  Index record_every = 1;
  /// Feed the covariance accumulator every this many steps after burn-in.
  Index sample_every = 1;
  int threads = 1;

  void validate() const;
  Index steps() const;
};

/// Default burn-in: five e-folds of the heat contraction, 5/(nu lambda_1).
double default_burn_in(double nu);

/// Running count / mean / co-moment with Chan's pairwise merge, plus raw
/// third and fourth power sums per coefficient.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Index dimension = 0);

  void add(const Eigen::VectorXd& x);
  void merge(const MomentAccumulator& other);

  Index count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& comoment() const { return comoment_; }
  /// Unbiased sample covariance; needs count >= 2.
  Eigen::MatrixXd covariance() const;
  Eigen::VectorXd skewness() const;
  Eigen::VectorXd excess_kurtosis() const;

 private:
  Index count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd comoment_;
  Eigen::VectorXd sum1_, sum2_, sum3_, sum4_;
};

struct TrajectoryStats {
  int truncation = 0;
  Scheme scheme = Scheme::ExactGaussian;
  double nu = 0.0;
  double dt = 0.0;
  double burn_in = 0.0;
  double noise_intensity = 0.0;
  std::string rng_algorithm;
  std::vector<double> times;
  /// Per-member series, one row per ensemble member, one column per time.
  Eigen::MatrixXd l2;
  Eigen::MatrixXd h1;
  MomentAccumulator accumulator;

  Eigen::VectorXd mean_l2() const { return l2.colwise().mean(); }
  Eigen::VectorXd mean_h1() const { return h1.colwise().mean(); }
  Index members() const { return l2.rows(); }
};

TrajectoryStats simulate(const SimConfig& config, const FourierField& f0);

CovarianceOperator empirical_covariance(const TrajectoryStats& stats);

struct EnergyBalance {
  /// E||f(t)||^2 + 2 nu E int_tau^t ||f||_{H1}^2 - E||f(tau)||^2 - nu ||Psi||^2 (t - tau)
  double residual;
  /// Standard error of the ensemble mean of the per-member residuals.
  double standard_error;
};

/// tau and t must be recorded sample times.
EnergyBalance energy_balance_residual(const TrajectoryStats& stats, double tau, double t);

/// Fraction of recorded post-burn-in samples with ||f||^2 > threshold.
double exceedance_fraction(const TrajectoryStats& stats, double threshold);

/// CSV "t,mean_l2,mean_h1,residual" with the residual taken from t = 0.
void write_stats_csv(std::ostream& out, const TrajectoryStats& stats);

}  // namespace scalarmix
