#include "morlie/hermite.hpp"

#include <cmath>
#include <stdexcept>

namespace morlie {

HermiteSpline::HermiteSpline(double t0, double t1, Eigen::MatrixXd values, Eigen::MatrixXd slopes)
    : t0_(t0), t1_(t1), values_(std::move(values)), slopes_(std::move(slopes)) {
  if (values_.rows() < 2) throw std::invalid_argument("HermiteSpline: need at least 2 knots");
  if (values_.rows() != slopes_.rows() || values_.cols() != slopes_.cols())
    throw std::invalid_argument("HermiteSpline: values/slopes shape mismatch");
  if (!(t1_ > t0_)) throw std::invalid_argument("HermiteSpline: empty time interval");
}

HermiteSpline HermiteSpline::catmull_rom(double t0, double t1, const Eigen::MatrixXd& values) {
  const int n = static_cast<int>(values.rows()) - 1;
  if (n < 1) throw std::invalid_argument("HermiteSpline::catmull_rom: need at least 2 knots");
  const double h = (t1 - t0) / n;
  Eigen::MatrixXd slopes(values.rows(), values.cols());
  slopes.row(0) = (values.row(1) - values.row(0)) / h;
  slopes.row(n) = (values.row(n) - values.row(n - 1)) / h;
  for (int i = 1; i < n; ++i) slopes.row(i) = (values.row(i + 1) - values.row(i - 1)) / (2.0 * h);
  return HermiteSpline(t0, t1, values, slopes);
}

void HermiteSpline::locate(double t, int& seg, double& s) const {
  const int n = segments();
  const double h = (t1_ - t0_) / n;
  // tolerate roundoff just outside the domain
  const double eps = 1e-12 * (std::abs(t0_) + std::abs(t1_) + 1.0);
  if (t < t0_ - eps || t > t1_ + eps) throw std::invalid_argument("HermiteSpline: t outside domain");
  double u = (t - t0_) / h;
  seg = static_cast<int>(u);
  if (seg < 0) seg = 0;
  if (seg >= n) seg = n - 1;
  s = u - seg;
  if (s < 0.0) s = 0.0;
  if (s > 1.0) s = 1.0;
}

Eigen::VectorXd HermiteSpline::eval(double t) const {
  int seg;
  double s;
  locate(t, seg, s);
  const double h = (t1_ - t0_) / segments();
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * values_.row(seg).transpose() + h * h10 * slopes_.row(seg).transpose() +
         h01 * values_.row(seg + 1).transpose() + h * h11 * slopes_.row(seg + 1).transpose();
}

Eigen::VectorXd HermiteSpline::eval_derivative(double t) const {
  int seg;
  double s;
  locate(t, seg, s);
  const double h = (t1_ - t0_) / segments();
  const double s2 = s * s;
  const double d00 = (6 * s2 - 6 * s) / h;
  const double d10 = 3 * s2 - 4 * s + 1;
  const double d01 = (-6 * s2 + 6 * s) / h;
  const double d11 = 3 * s2 - 2 * s;
  return d00 * values_.row(seg).transpose() + d10 * slopes_.row(seg).transpose() +
         d01 * values_.row(seg + 1).transpose() + d11 * slopes_.row(seg + 1).transpose();
}

HermiteSpline HermiteSpline::least_squares_fit(const Eigen::VectorXd& times,
                                               const Eigen::MatrixXd& samples, int n_segments,
                                               double t0, double t1) {
  const int m = static_cast<int>(times.size());
  if (m != samples.rows()) throw std::invalid_argument("least_squares_fit: times/samples mismatch");
  if (n_segments < 1) throw std::invalid_argument("least_squares_fit: n_segments must be >= 1");
  if (m < n_segments + 1)
    throw std::invalid_argument("least_squares_fit: fewer time points than segments+1");
  if (std::isnan(t0)) t0 = times.minCoeff();
  if (std::isnan(t1)) t1 = times.maxCoeff();
  if (!(t1 > t0)) throw std::invalid_argument("least_squares_fit: degenerate time range");
  if (times.minCoeff() < t0 || times.maxCoeff() > t1)
    throw std::invalid_argument("least_squares_fit: samples outside the knot range");

  const int n = n_segments;
  const double h = (t1 - t0) / n;
  // unknowns per channel: values v_0..v_n then slopes m_0..m_n
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, 2 * (n + 1));
  for (int r = 0; r < m; ++r) {
    double u = (times(r) - t0) / h;
    int seg = static_cast<int>(u);
    if (seg >= n) seg = n - 1;
    if (seg < 0) seg = 0;
    double s = u - seg;
    if (s < 0.0) s = 0.0;
    if (s > 1.0) s = 1.0;
    const double s2 = s * s, s3 = s2 * s;
    J(r, seg) += 2 * s3 - 3 * s2 + 1;
    J(r, seg + 1) += -2 * s3 + 3 * s2;
    J(r, n + 1 + seg) += h * (s3 - 2 * s2 + s);
    J(r, n + 1 + seg + 1) += h * (s3 - s2);
  }
  // fit about the per-channel mean so the min-norm solution of an
  // underdetermined system stays exact for constant channels
  Eigen::RowVectorXd mean = samples.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd coeffs = svd.solve(samples.rowwise() - mean);
  Eigen::MatrixXd values = coeffs.topRows(n + 1).rowwise() + mean;
  Eigen::MatrixXd slopes = coeffs.bottomRows(n + 1);
  return HermiteSpline(t0, t1, values, slopes);
}

}  // namespace morlie
