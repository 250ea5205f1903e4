#pragma once

#include <Eigen/Dense>

namespace hpbvp {

/// zeta = (tau, eta, gamma); eta has length d - 1.
struct Frequency {
  double tau = 0.0;
  Eigen::VectorXd eta;
  double gamma = 0.0;

  double norm() const;
  Frequency scaled(double s) const;
};

struct PolarFrequency {
  Frequency zcheck;  // unit sphere
  double rho = 0.0;
};

/// Throws Error(kDegenerateFrequency) for zeta = 0.
PolarFrequency to_polar(const Frequency& zeta);
Frequency from_polar(const PolarFrequency& pf);

/// Unit direction with tangential part (tau, eta) rescaled so that
/// |zcheck| = 1 and zcheck.gamma = gamma_check.
Frequency sphere_point(double tau, const Eigen::VectorXd& eta, double gamma_check);

}  // namespace hpbvp
