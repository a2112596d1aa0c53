#pragma once

#include "scalarmix/flows.hpp"
#include "scalarmix/fourier.hpp"

#include <random>

namespace testing {

inline scalarmix::FourierField random_field(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd c(scalarmix::basis_dimension(n));
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = normal(rng);
  return scalarmix::FourierField(n, c);
}

inline scalarmix::FourierField unit_field(int n, scalarmix::ModeIndex k, scalarmix::Parity p,
                                          double amplitude = 1.0) {
  const scalarmix::FieldEntry e{k, p, amplitude};
  return scalarmix::make_field(n, std::span<const scalarmix::FieldEntry>(&e, 1));
}

inline scalarmix::Flow shear_sin() { return scalarmix::make_shear(scalarmix::ShearProfile{{}, {1.0}}); }

}  // namespace testing
