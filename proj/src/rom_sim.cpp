#include "morlie/rom_sim.hpp"

#include <cmath>
#include <stdexcept>

namespace morlie {

namespace {

void check_grid(const std::vector<double>& t_grid) {
  if (t_grid.size() < 2) throw std::invalid_argument("integrate: need at least two grid times");
  for (size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("integrate: times must strictly increase");
}

/// dexpinv_u(v) truncated after the second-order bracket.
Matrix dexpinv(const Matrix& u, const Matrix& v) {
  const Matrix uv = u * v - v * u;
  const Matrix uuv = u * uv - uv * u;
  return v - 0.5 * uv + (1.0 / 12.0) * uuv;
}

}  // namespace

Trajectory integrate_rom(const RomModel& model, const std::vector<double>& t_grid,
                         Integrator method) {
  check_grid(t_grid);
  const double eps = 1e-9 * (1.0 + std::abs(model.rho.t_max()));
  if (t_grid.front() < model.rho.t_min() - eps || t_grid.back() > model.rho.t_max() + eps)
    throw std::invalid_argument("integrate_rom: grid leaves the rho domain");
  validate_state(model.x0);

  const auto rho_at = [&](double t) { return model.rho.eval_element(t); };
  Trajectory out;
  out.provenance = Provenance::rom;
  out.times = t_grid;
  GroupElement g = GroupElement::identity(model.action.ambient_dim);
  out.group_path.push_back(g);
  out.states.push_back(apply_action(model.action, g, model.x0));
  for (size_t k = 0; k + 1 < t_grid.size(); ++k) {
    const double t = t_grid[k];
    const double h = t_grid[k + 1] - t;
    Matrix u;
    if (method == Integrator::lie_euler) {
      u = h * rho_at(t).mat;
    } else {
      const Matrix r1 = rho_at(t).mat;
      const Matrix k1 = r1;  // dexpinv at u=0
      const Matrix r2 = rho_at(t + 0.5 * h).mat;
      const Matrix k2 = dexpinv(0.5 * h * k1, r2);
      const Matrix k3 = dexpinv(0.5 * h * k2, r2);
      const Matrix r4 = rho_at(t + h).mat;
      const Matrix k4 = dexpinv(h * k3, r4);
      u = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    g = GroupElement(exp_for_action(model.action, AlgebraElement(u)).mat * g.mat);
    out.group_path.push_back(g);
    out.states.push_back(apply_action(model.action, g, model.x0));
  }
  return out;
}

namespace {

Eigen::Vector2d radial_field(const Eigen::Vector2d& q, double mu, double a, double b) {
  return {q(0) / a * std::sin(b * q(1)), mu};
}

Eigen::Vector2d rk4_step(const Eigen::Vector2d& q, double t0, double h, double mu, double a,
                         double b) {
  (void)t0;  // autonomous
  const Eigen::Vector2d k1 = radial_field(q, mu, a, b);
  const Eigen::Vector2d k2 = radial_field(q + 0.5 * h * k1, mu, a, b);
  const Eigen::Vector2d k3 = radial_field(q + 0.5 * h * k2, mu, a, b);
  const Eigen::Vector2d k4 = radial_field(q + h * k3, mu, a, b);
  return q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
}

Eigen::Vector2d integrate_interval(const Eigen::Vector2d& q0, double t0, double t1, double mu,
                                   double a, double b) {
  // classic RK4 with step halving until the endpoint settles
  int n = 1;
  Eigen::Vector2d prev;
  for (int round = 0;; ++round) {
    Eigen::Vector2d q = q0;
    const double h = (t1 - t0) / n;
    for (int i = 0; i < n; ++i) {
      q = rk4_step(q, t0 + i * h, h, mu, a, b);
      if (!(q(0) > 0.0)) throw std::domain_error("radial oscillator: q1 reached zero");
    }
    if (round > 0) {
      bool settled = true;
      for (int i = 0; i < 2; ++i)
        settled = settled &&
                  std::abs(q(i) - prev(i)) <= 1e-10 * (std::abs(q(i)) + std::abs(prev(i)));
      if (settled) return q;
    }
    if (n > (1 << 16)) return q;
    prev = q;
    n *= 2;
  }
}

}  // namespace

Trajectory integrate_reference_fom(ReferenceField field, const Vector& params,
                                   const StatePoint& x0, const std::vector<double>& t_grid) {
  check_grid(t_grid);
  validate_state(x0);
  Trajectory out;
  out.provenance = Provenance::fom;
  out.times = t_grid;
  if (field == ReferenceField::radial_oscillator) {
    if (x0.chart != Chart::polar2d)
      throw std::invalid_argument("radial oscillator: polar state required");
    if (params.size() != 3) throw std::invalid_argument("radial oscillator: params = (mu, a, b)");
    const double mu = params(0), a = params(1), b = params(2);
    Eigen::Vector2d q = x0.coords;
    out.states.push_back(x0);
    for (size_t k = 0; k + 1 < t_grid.size(); ++k) {
      q = integrate_interval(q, t_grid[k], t_grid[k + 1], mu, a, b);
      out.states.push_back(make_polar(q(0), q(1)));
    }
  } else {
    if (x0.chart != Chart::grid1d)
      throw std::invalid_argument("linear transport: grid state required");
    if (params.size() != 2) throw std::invalid_argument("linear transport: params = (mu1, mu2)");
    const double mu1 = params(0);
    for (double t : t_grid) {
      const double shift = -mu1 * (t - t_grid.front());
      out.states.push_back(shift == 0.0 ? x0 : make_grid(spectral_shift(x0.coords, shift)));
    }
  }
  return out;
}

Trajectory reconstruct(const ActionSpec& action, const std::vector<GroupElement>& group_path,
                       const std::vector<double>& times, const StatePoint& x0) {
  if (group_path.size() != times.size())
    throw std::invalid_argument("reconstruct: path/times length mismatch");
  Trajectory out;
  out.provenance = Provenance::reconstruction;
  out.times = times;
  out.group_path = group_path;
  for (const auto& g : group_path) out.states.push_back(apply_action(action, g, x0));
  return out;
}

double reconstruction_consistency_residual(const ActionSpec& action, const Trajectory& traj,
                                           const ReducedVectorField& rho) {
  if (traj.states.size() < 3) return 0.0;
  double worst = 0.0;
  for (size_t k = 1; k + 1 < traj.states.size(); ++k) {
    const double dt2 = traj.times[k + 1] - traj.times[k - 1];
    const Vector fd = (traj.states[k + 1].coords - traj.states[k - 1].coords) / dt2;
    const Vector gen =
        infinitesimal_generator(action, rho.eval_element(traj.times[k]), traj.states[k]);
    const Vector w = metric_weights(traj.states[k]);
    worst = std::max(worst, std::sqrt((w.array() * (fd - gen).array().square()).sum()));
  }
  return worst;
}

}  // namespace morlie
