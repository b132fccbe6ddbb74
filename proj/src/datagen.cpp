#include "morlie/datagen.hpp"

#include "morlie/rom_sim.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>

namespace morlie {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(tag)));
}

HermiteSpline random_spline(std::mt19937_64& rng, double horizon, int knots,
                            const std::vector<double>& channel_amp) {
  Matrix values(knots, channel_amp.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < knots; ++k)
    for (size_t c = 0; c < channel_amp.size(); ++c) values(k, c) = channel_amp[c] * u(rng);
  return HermiteSpline::catmull_rom(0.0, horizon, values);
}

Matrix skew(double x, double y, double z) {
  Matrix w = Matrix::Zero(3, 3);
  w(0, 1) = -z; w(1, 0) = z;
  w(0, 2) = y;  w(2, 0) = -y;
  w(1, 2) = -x; w(2, 1) = x;
  return w;
}

/// One RKMK4 step of g' = g * T(t) (right/body form).
Matrix rkmk4_right_step(const Matrix& g, double t, double h,
                        const std::function<Matrix(double)>& twist) {
  auto f = [](const Matrix& u, const Matrix& v) -> Matrix {
    const Matrix uv = u * v - v * u;
    return v + 0.5 * uv + (1.0 / 12.0) * (u * uv - uv * u);
  };
  const Matrix k1 = twist(t);
  const Matrix r2 = twist(t + 0.5 * h);
  const Matrix k2 = f(0.5 * h * k1, r2);
  const Matrix k3 = f(0.5 * h * k2, r2);
  const Matrix k4 = f(h * k3, twist(t + h));
  const Matrix u = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  return g * u.exp();
}

/// One RKMK4 step of g' = A(t) * g (left/spatial form).
Matrix rkmk4_left_step(const Matrix& g, double t, double h,
                       const std::function<Matrix(double)>& gen) {
  auto f = [](const Matrix& u, const Matrix& v) -> Matrix {
    const Matrix uv = u * v - v * u;
    return v - 0.5 * uv + (1.0 / 12.0) * (u * uv - uv * u);
  };
  const Matrix k1 = gen(t);
  const Matrix r2 = gen(t + 0.5 * h);
  const Matrix k2 = f(0.5 * h * k1, r2);
  const Matrix k3 = f(0.5 * h * k2, r2);
  const Matrix k4 = f(h * k3, gen(t + h));
  const Matrix u = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  return u.exp() * g;
}

}  // namespace

void BenchmarkConfig::validate() const {
  if (n_traj < 1 || n_particles < 1 || n_steps < 1)
    throw std::invalid_argument("benchmark config: counts must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("benchmark config: horizon must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("benchmark config: sigma must be >= 0");
}

Matrix twist_matrix(const Vector& ch) {
  if (ch.size() != 6) throw std::invalid_argument("twist_matrix: need 6 channels");
  Matrix t = Matrix::Zero(4, 4);
  t.block<3, 3>(0, 0) = skew(ch(0), ch(1), ch(2));
  t.block<3, 1>(0, 3) = ch.segment<3>(3);
  return t;
}

Matrix affine_generator_matrix(const Vector& ch) {
  if (ch.size() != 12) throw std::invalid_argument("affine_generator_matrix: need 12 channels");
  Matrix a = Matrix::Zero(4, 4);
  a.block<3, 3>(0, 0) = skew(ch(0), ch(1), ch(2));
  a(0, 1) += ch(3); a(1, 0) += ch(3);  // symmetric shear
  a(0, 2) += ch(4); a(2, 0) += ch(4);
  a(1, 2) += ch(5); a(2, 1) += ch(5);
  a(0, 0) = ch(6); a(1, 1) = ch(7); a(2, 2) = ch(8);
  a.block<3, 1>(0, 3) = ch.segment<3>(9);
  return a;
}

std::pair<SnapshotSet, RigidTruth> gen_rigid_cloud(const BenchmarkConfig& cfg) {
  cfg.validate();
  RigidTruth truth;
  {
    auto rng = stream(cfg.seed, 1);
    std::vector<double> amp = {cfg.amp_rotation, cfg.amp_rotation, cfg.amp_rotation,
                               cfg.amp_translation, cfg.amp_translation, cfg.amp_translation};
    if (cfg.constant_twist.size() == 6) {
      Matrix values(2, 6);
      values.row(0) = cfg.constant_twist.transpose();
      values.row(1) = cfg.constant_twist.transpose();
      truth.twist = HermiteSpline::catmull_rom(0.0, cfg.horizon, values);
    } else {
      truth.twist = random_spline(rng, cfg.horizon, cfg.spline_knots, amp);
    }
  }
  auto body = [&](double t) { return twist_matrix(truth.twist.eval(t)); };

  const double dt = cfg.horizon / cfg.n_steps;
  Matrix H = Matrix::Identity(4, 4);
  truth.path.emplace_back(H);
  for (int k = 0; k < cfg.n_steps; ++k) {
    H = rkmk4_right_step(H, k * dt, dt, body);
    truth.path.emplace_back(H);
  }
  for (int k = 0; k <= cfg.n_steps; ++k) {
    const Matrix& Hk = truth.path[k].mat;
    truth.spatial_twist.push_back(Hk * body(k * dt) * Hk.inverse());
  }

  SnapshotSet S;
  for (int j = 0; j < cfg.n_traj; ++j) {
    auto pos_rng = stream(cfg.seed, 1000 + j);
    auto noise_rng = stream(cfg.seed, 2000 + j);
    std::uniform_real_distribution<double> box(-0.5, 0.5);
    std::normal_distribution<double> gauss(0.0, cfg.sigma);
    Vector p0(3 * cfg.n_particles);
    for (int i = 0; i < p0.size(); ++i) p0(i) = box(pos_rng);
    for (int k = 0; k <= cfg.n_steps; ++k) {
      const Matrix& Hk = truth.path[k].mat;
      SnapshotRecord rec;
      rec.traj = j;
      rec.step = k;
      rec.time = k * dt;
      rec.param = Vector::Constant(1, static_cast<double>(j));
      Vector coords(3 * cfg.n_particles);
      for (int i = 0; i < cfg.n_particles; ++i) {
        Eigen::Vector3d p = Hk.block<3, 3>(0, 0) * Eigen::Vector3d(p0.segment<3>(3 * i)) +
                            Hk.block<3, 1>(0, 3);
        if (cfg.sigma > 0.0)
          p += Eigen::Vector3d(gauss(noise_rng), gauss(noise_rng), gauss(noise_rng));
        coords.segment<3>(3 * i) = p;
      }
      rec.state = make_pointcloud(coords);
      S.records.push_back(std::move(rec));
    }
  }
  S.sort_and_validate();
  return {std::move(S), std::move(truth)};
}

std::pair<SnapshotSet, SheeringTruth> gen_sheering_clouds(const BenchmarkConfig& cfg) {
  cfg.validate();
  if (cfg.n_clusters < 1) throw std::invalid_argument("gen_sheering_clouds: need >= 1 cluster");
  SheeringTruth truth;
  const double dt = cfg.horizon / cfg.n_steps;
  for (int c = 0; c < cfg.n_clusters; ++c) {
    auto rng = stream(cfg.seed, 10 + c);
    std::vector<double> amp = {cfg.amp_rotation, cfg.amp_rotation, cfg.amp_rotation,
                               cfg.amp_shear,    cfg.amp_shear,    cfg.amp_shear,
                               cfg.amp_shear,    cfg.amp_shear,    cfg.amp_shear,
                               cfg.amp_translation, cfg.amp_translation, cfg.amp_translation};
    if (static_cast<int>(cfg.constant_generators.size()) > c &&
        cfg.constant_generators[c].size() == 12) {
      Matrix values(2, 12);
      values.row(0) = cfg.constant_generators[c].transpose();
      values.row(1) = cfg.constant_generators[c].transpose();
      truth.generators.push_back(HermiteSpline::catmull_rom(0.0, cfg.horizon, values));
    } else {
      truth.generators.push_back(random_spline(rng, cfg.horizon, cfg.spline_knots, amp));
    }
    auto gen = [&, c](double t) { return affine_generator_matrix(truth.generators[c].eval(t)); };
    std::vector<GroupElement> path;
    Matrix g = Matrix::Identity(4, 4);
    path.emplace_back(g);
    for (int k = 0; k < cfg.n_steps; ++k) {
      g = rkmk4_left_step(g, k * dt, dt, gen);
      path.emplace_back(g);
    }
    truth.paths.push_back(std::move(path));
  }

  const int total = cfg.n_clusters * cfg.particles_per_cluster;
  truth.assignment.resize(total);
  for (int i = 0; i < total; ++i) truth.assignment[i] = i / cfg.particles_per_cluster;

  SnapshotSet S;
  for (int j = 0; j < cfg.n_traj; ++j) {
    auto pos_rng = stream(cfg.seed, 1000 + j);
    auto noise_rng = stream(cfg.seed, 2000 + j);
    std::uniform_real_distribution<double> box(-0.5, 0.5);
    std::normal_distribution<double> gauss(0.0, cfg.sigma);
    Vector p0(3 * total);
    for (int i = 0; i < total; ++i) {
      const int c = truth.assignment[i];
      p0(3 * i + 0) = box(pos_rng) + c * cfg.cluster_spacing;
      p0(3 * i + 1) = box(pos_rng);
      p0(3 * i + 2) = box(pos_rng);
    }
    for (int k = 0; k <= cfg.n_steps; ++k) {
      SnapshotRecord rec;
      rec.traj = j;
      rec.step = k;
      rec.time = k * dt;
      rec.param = Vector::Constant(1, static_cast<double>(j));
      Vector coords(3 * total);
      for (int i = 0; i < total; ++i) {
        const Matrix& g = truth.paths[truth.assignment[i]][k].mat;
        Eigen::Vector3d p =
            g.block<3, 3>(0, 0) * Eigen::Vector3d(p0.segment<3>(3 * i)) + g.block<3, 1>(0, 3);
        if (cfg.sigma > 0.0)
          p += Eigen::Vector3d(gauss(noise_rng), gauss(noise_rng), gauss(noise_rng));
        coords.segment<3>(3 * i) = p;
      }
      rec.state = make_pointcloud(coords);
      S.records.push_back(std::move(rec));
    }
  }
  S.sort_and_validate();
  return {std::move(S), std::move(truth)};
}

SnapshotSet gen_radial_oscillator(const BenchmarkConfig& cfg) {
  cfg.validate();
  if (!(cfg.q1_0 > 0.0)) throw std::invalid_argument("gen_radial_oscillator: q1_0 must be > 0");
  SnapshotSet S;
  std::vector<double> grid(cfg.n_steps + 1);
  const double dt = cfg.horizon / cfg.n_steps;
  for (int k = 0; k <= cfg.n_steps; ++k) grid[k] = k * dt;
  for (size_t j = 0; j < cfg.mu_values.size(); ++j) {
    const double mu = cfg.mu_values[j];
    std::vector<StatePoint> states;
    if (cfg.exact_circle) {
      for (double t : grid) states.push_back(make_polar(cfg.q1_0, cfg.q2_0 + mu * t));
    } else {
      Vector params(3);
      params << mu, cfg.radial_a, static_cast<double>(cfg.radial_b);
      Trajectory fom = integrate_reference_fom(ReferenceField::radial_oscillator, params,
                                               make_polar(cfg.q1_0, cfg.q2_0), grid);
      states = std::move(fom.states);
    }
    for (int k = 0; k <= cfg.n_steps; ++k) {
      SnapshotRecord rec;
      rec.traj = static_cast<int>(j);
      rec.step = k;
      rec.time = grid[k];
      rec.param = Vector::Constant(1, mu);
      rec.state = states[k];
      S.records.push_back(std::move(rec));
    }
  }
  S.sort_and_validate();
  return S;
}

SnapshotSet gen_linear_transport(const BenchmarkConfig& cfg) {
  cfg.validate();
  if (cfg.grid_size < 2 || (cfg.grid_size & (cfg.grid_size - 1)) != 0)
    throw std::invalid_argument("gen_linear_transport: grid size must be a power of two");
  SnapshotSet S;
  const double dt = cfg.horizon / cfg.n_steps;
  int traj = 0;
  for (double mu1 : cfg.mu1_values) {
    for (int mu2 : cfg.mu2_values) {
      if (mu2 == 0) throw std::invalid_argument("gen_linear_transport: mu2 must be nonzero");
      for (int k = 0; k <= cfg.n_steps; ++k) {
        const double t = k * dt;
        Vector u(cfg.grid_size);
        for (int i = 0; i < cfg.grid_size; ++i) {
          const double x = 2.0 * std::numbers::pi * i / cfg.grid_size;
          u(i) = std::sin(mu2 * (x - mu1 * t));
        }
        SnapshotRecord rec;
        rec.traj = traj;
        rec.step = k;
        rec.time = t;
        rec.param = Vector(2);
        rec.param << mu1, static_cast<double>(mu2);
        rec.state = make_grid(u);
        S.records.push_back(std::move(rec));
      }
      ++traj;
    }
  }
  S.sort_and_validate();
  return S;
}

}  // namespace morlie
