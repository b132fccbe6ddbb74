#pragma once

#include <Eigen/Dense>

#include <limits>

namespace morlie {

/// Piecewise-cubic Hermite interpolant on a uniform knot grid, one or more
/// channels evaluated jointly. C1 by construction (shared knot values and
/// slopes between adjacent segments).
class HermiteSpline {
public:
  HermiteSpline() = default;

  /// Knots are n_segments+1 uniform points on [t0, t1]; values/slopes are
  /// (n_segments+1) x channels.
  HermiteSpline(double t0, double t1, Eigen::MatrixXd values, Eigen::MatrixXd slopes);

  /// Interpolant through the given knot values with Catmull-Rom slopes
  /// (central differences, one-sided at the ends).
  static HermiteSpline catmull_rom(double t0, double t1, const Eigen::MatrixXd& values);

  /// Least-squares fit of knot values and slopes to scattered samples.
  /// samples is len(times) x channels. Rank-deficient systems (fewer samples
  /// than unknowns) resolve to the minimum-norm solution. t0/t1 override the
  /// knot range (NaN: span of the sample times).
  static HermiteSpline least_squares_fit(const Eigen::VectorXd& times,
                                         const Eigen::MatrixXd& samples, int n_segments,
                                         double t0 = std::numeric_limits<double>::quiet_NaN(),
                                         double t1 = std::numeric_limits<double>::quiet_NaN());

  Eigen::VectorXd eval(double t) const;
  Eigen::VectorXd eval_derivative(double t) const;

  double t_min() const { return t0_; }
  double t_max() const { return t1_; }
  int channels() const { return static_cast<int>(values_.cols()); }
  int segments() const { return static_cast<int>(values_.rows()) - 1; }
  bool empty() const { return values_.rows() == 0; }

private:
  double t0_ = 0.0;
  double t1_ = 1.0;
  Eigen::MatrixXd values_;  // (n+1) x channels
  Eigen::MatrixXd slopes_;  // (n+1) x channels

  void locate(double t, int& seg, double& s) const;
};

}  // namespace morlie
