#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "morlie/baselines.hpp"
#include "morlie/datagen.hpp"
#include "morlie/subalgebra.hpp"

#include <cmath>
#include <random>

using namespace morlie;

namespace {

StatePoint random_cloud(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector coords(3 * n);
  for (int i = 0; i < coords.size(); ++i) coords(i) = u(rng);
  return make_pointcloud(coords);
}

SnapshotSet cloud_snapshots(const std::vector<Vector>& coords) {
  SnapshotSet S;
  for (size_t k = 0; k < coords.size(); ++k) {
    SnapshotRecord rec;
    rec.traj = 0;
    rec.step = static_cast<int>(k);
    rec.time = 0.1 * k;
    rec.param = Vector::Zero(1);
    rec.state = make_pointcloud(coords[k]);
    S.records.push_back(rec);
  }
  S.sort_and_validate();
  return S;
}

ReducedVectorField constant_rho(const AlgebraBasis& basis, const Vector& coeffs, double t1) {
  ReducedVectorField rho;
  rho.basis = basis;
  Matrix values(2, coeffs.size()), slopes = Matrix::Zero(2, coeffs.size());
  values.row(0) = coeffs.transpose();
  values.row(1) = coeffs.transpose();
  rho.spline = HermiteSpline(0.0, t1, values, slopes);
  return rho;
}

double noise_floor_mc(double sigma, int n_particles, int n_samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  double acc = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    double dist = 0.0;
    for (int i = 0; i < n_particles; ++i) {
      Eigen::Vector3d d(gauss(rng) - gauss(rng), gauss(rng) - gauss(rng), gauss(rng) - gauss(rng));
      dist += d.norm();
    }
    acc += dist / n_particles;
  }
  return acc / n_samples;
}

}  // namespace

TEST_CASE("cloud distance basics") {
  Vector zero6 = Vector::Zero(6);
  StatePoint a = make_pointcloud(zero6);
  CHECK(cloud_distance(a, a) == 0.0);

  Vector one = Vector::Zero(3);
  one(0) = 1.0;
  CHECK(cloud_distance(make_pointcloud(Vector::Zero(3)), make_pointcloud(one)) == 1.0);

  Vector b = Vector::Zero(6);
  b(0) = 1.0;
  b(4) = 3.0;
  CHECK(cloud_distance(a, make_pointcloud(b), CloudDistanceMode::mean) == doctest::Approx(2.0));
  CHECK(cloud_distance(a, make_pointcloud(b), CloudDistanceMode::max) == doctest::Approx(3.0));
  CHECK_THROWS_AS(cloud_distance(a, make_pointcloud(Vector::Zero(3))), std::invalid_argument);
}

TEST_CASE("mean cloud distance satisfies the metric axioms") {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    StatePoint a = random_cloud(rng, 5), b = random_cloud(rng, 5), c = random_cloud(rng, 5);
    const double ab = cloud_distance(a, b), ba = cloud_distance(b, a);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(cloud_distance(a, a) == 0.0);
    CHECK(ab >= 0.0);
    CHECK(cloud_distance(a, c) <= ab + cloud_distance(b, c) + 1e-12);
  }
}

TEST_CASE("truth ROM reproduces noiseless rigid data") {
  // screw motion: the spatial twist equals the (constant) body twist, so the
  // exact group truth is representable as a constant reduced field
  BenchmarkConfig cfg;
  cfg.family = Family::rigid;
  cfg.n_traj = 1;
  cfg.n_particles = 12;
  cfg.n_steps = 120;
  cfg.horizon = 1.0;
  cfg.sigma = 0.0;
  cfg.seed = 4;
  cfg.constant_twist = Vector(6);
  cfg.constant_twist << 0.0, 0.0, 0.9, 0.0, 0.0, 0.4;
  auto [S, truth] = gen_rigid_cloud(cfg);
  ActionSpec spec = make_affine_cloud_action();
  const Vector coeffs =
      spec.group_basis.coefficients_of(AlgebraElement(twist_matrix(cfg.constant_twist)));
  auto span = S.trajectory(0);
  Trajectory data;
  data.provenance = Provenance::fom;
  for (const auto& r : span) {
    data.times.push_back(r.time);
    data.states.push_back(r.state);
  }
  RomModel model{spec, constant_rho(spec.group_basis, coeffs, 1.0), span.front().state};
  ErrorCurve full = trajectory_errors(data, model, ErrorMode::full);
  ErrorCurve step = trajectory_errors(data, model, ErrorMode::step_ahead);
  for (double e : full.errors) CHECK(e < 1e-8);
  for (double e : step.errors) CHECK(e < 1e-8);
}

TEST_CASE("a zero-motion ROM pays the drift to the data") {
  BenchmarkConfig cfg;
  cfg.family = Family::rigid;
  cfg.n_traj = 1;
  cfg.n_particles = 8;
  cfg.n_steps = 40;
  cfg.horizon = 1.0;
  cfg.sigma = 0.0;
  cfg.seed = 6;
  auto [S, truth] = gen_rigid_cloud(cfg);
  ActionSpec spec = make_affine_cloud_action();
  RomModel model{spec, constant_rho(spec.group_basis, Vector::Zero(12), 1.0),
                 S.records.front().state};
  Trajectory data;
  auto span = S.trajectory(0);
  for (const auto& r : span) {
    data.times.push_back(r.time);
    data.states.push_back(r.state);
  }
  ErrorCurve full = trajectory_errors(data, model, ErrorMode::full);
  for (size_t k = 0; k < full.errors.size(); ++k)
    CHECK(full.errors[k] ==
          doctest::Approx(state_distance(span.front().state, span[k].state)).epsilon(1e-12));
}

TEST_CASE("step-ahead error of the truth ROM sits at the noise floor") {
  BenchmarkConfig cfg;
  cfg.family = Family::rigid;
  cfg.n_traj = 1;
  cfg.n_particles = 40;
  cfg.n_steps = 80;
  cfg.horizon = 0.4;
  cfg.sigma = 0.01;
  cfg.seed = 8;
  auto [S, truth] = gen_rigid_cloud(cfg);
  ActionSpec spec = make_affine_cloud_action();
  ReducedSnapshotMatrix Sg;
  Sg.basis = spec.group_basis;
  auto span = S.trajectory(0);
  for (size_t k = 0; k < span.size(); ++k) {
    ReducedSnapshotColumn col;
    col.traj = 0;
    col.step = static_cast<int>(k);
    col.step_to = static_cast<int>(k) + 1;
    col.time = span[k].time;
    col.coeffs = spec.group_basis.coefficients_of(AlgebraElement(truth.spatial_twist[k]));
    Sg.columns.push_back(col);
  }
  ReducedVectorField rho = fit_rho_theta(Sg, 40, 1);
  Trajectory data;
  for (const auto& r : span) {
    data.times.push_back(r.time);
    data.states.push_back(r.state);
  }
  RomModel model{spec, rho, span.front().state};
  ErrorCurve step = trajectory_errors(data, model, ErrorMode::step_ahead);
  double mean = 0.0;
  for (double e : step.errors) mean += e;
  mean /= step.errors.size();
  const double floor = noise_floor_mc(cfg.sigma, cfg.n_particles, 4000, 99);
  CHECK(mean < 3.0 * floor);
  CHECK(mean > floor / 3.0);
}

TEST_CASE("pod spectra: rank-1 and orthonormal snapshot matrices") {
  // rank-1: every snapshot a multiple of one cloud
  std::mt19937 rng(10);
  Vector base = random_cloud(rng, 4).coords;
  std::vector<Vector> rank1;
  for (int k = 1; k <= 5; ++k) rank1.push_back(k * base);
  PodResult pod = pod_svd(cloud_snapshots(rank1));
  CHECK(pod.singular_values(0) > 0.0);
  for (int i = 1; i < pod.singular_values.size(); ++i)
    CHECK(pod.singular_values(i) < 1e-10 * pod.singular_values(0));

  // orthonormal columns (grid chart keeps the construction valid)
  SnapshotSet ortho;
  for (int k = 0; k < 4; ++k) {
    SnapshotRecord rec;
    rec.traj = 0;
    rec.step = k;
    rec.time = 0.1 * k;
    rec.param = Vector::Zero(1);
    Vector u = Vector::Zero(8);
    u(k) = 1.0;
    rec.state = make_grid(u);
    ortho.records.push_back(rec);
  }
  ortho.sort_and_validate();
  PodResult pod2 = pod_svd(ortho);
  for (int i = 0; i < 4; ++i) CHECK(pod2.singular_values(i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pod projection error: exact at full rank, monotone in the mode count") {
  std::mt19937 rng(11);
  std::vector<Vector> snaps;
  for (int k = 0; k < 5; ++k) snaps.push_back(random_cloud(rng, 4).coords);
  SnapshotSet S = cloud_snapshots(snaps);
  PodError exact = pod_reconstruct_error(S, 5);
  CHECK(exact.worst < 1e-12);
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 5; ++n) {
    PodError err = pod_reconstruct_error(S, n);
    CHECK(err.worst <= prev + 1e-12);
    prev = err.worst;
  }
  // centered zero-mode error equals the distance to the mean snapshot
  PodError centered = pod_reconstruct_error(S, 0, true);
  Vector mean = Vector::Zero(12);
  for (const auto& s : snaps) mean += s;
  mean /= snaps.size();
  double worst = 0.0;
  for (const auto& s : snaps)
    worst = std::max(worst, state_distance(make_pointcloud(s), make_pointcloud(mean)));
  CHECK(centered.worst == doctest::Approx(worst).epsilon(1e-12));
  CHECK_THROWS_AS(pod_reconstruct_error(S, 6), std::invalid_argument);
}

TEST_CASE("pod beats random subspaces (brute-force Eckart-Young)") {
  std::mt19937 rng(12);
  std::vector<Vector> snaps;
  for (int k = 0; k < 5; ++k) snaps.push_back(random_cloud(rng, 4).coords);
  SnapshotSet S = cloud_snapshots(snaps);
  Matrix A(12, 5);
  for (int k = 0; k < 5; ++k) A.col(k) = snaps[k];

  PodResult pod = pod_svd(S);
  for (int n = 1; n <= 3; ++n) {
    const Matrix basis = pod.modes.leftCols(n);
    const double pod_sq = (A - basis * (basis.transpose() * A)).squaredNorm();
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Matrix R(12, n);
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < n; ++j) R(i, j) = gauss(rng);
      Eigen::HouseholderQR<Matrix> qr(R);
      Matrix Q = qr.householderQ() * Matrix::Identity(12, n);
      const double rand_sq = (A - Q * (Q.transpose() * A)).squaredNorm();
      CHECK(pod_sq <= rand_sq + 1e-12);
    }
  }
}

TEST_CASE("group width of the trivial group is the data spread") {
  std::mt19937 rng(13);
  std::vector<Vector> snaps;
  for (int k = 0; k < 4; ++k) snaps.push_back(random_cloud(rng, 5).coords);
  SnapshotSet S = cloud_snapshots(snaps);
  ActionSpec trivial = make_affine_cloud_action();
  trivial.group_basis = AlgebraBasis{};  // zero-dimensional algebra
  StatePoint anchor = S.records.front().state;
  WidthResult w = estimate_group_width(S, trivial, anchor);
  double want = 0.0;
  for (const auto& r : S.records) want = std::max(want, state_distance(r.state, anchor));
  CHECK(w.width == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("noiseless rigid data has zero SE(3) width") {
  BenchmarkConfig cfg;
  cfg.family = Family::rigid;
  cfg.n_traj = 1;
  cfg.n_particles = 15;
  cfg.n_steps = 30;
  cfg.horizon = 1.0;
  cfg.sigma = 0.0;
  cfg.seed = 14;
  auto [S, truth] = gen_rigid_cloud(cfg);
  WidthResult w = width_over_initial_conditions(S, make_affine_cloud_action(se3_basis()));
  CHECK(w.width < 1e-6);
}

TEST_CASE("width ordering follows orbit containment") {
  BenchmarkConfig cfg;
  cfg.family = Family::rigid;
  cfg.n_traj = 1;
  cfg.n_particles = 12;
  cfg.n_steps = 25;
  cfg.horizon = 1.0;
  cfg.sigma = 0.005;
  cfg.seed = 15;
  auto [S, truth] = gen_rigid_cloud(cfg);
  const double w_aff =
      width_over_initial_conditions(S, make_affine_cloud_action(aff3_basis())).width;
  const double w_se3 =
      width_over_initial_conditions(S, make_affine_cloud_action(se3_basis())).width;
  const double w_trans =
      width_over_initial_conditions(S, make_affine_cloud_action(translation3_basis())).width;
  CHECK(w_aff <= w_se3 + 1e-10);
  CHECK(w_se3 <= w_trans + 1e-10);
  // upper-bound property: the multi-start solve never exceeds the
  // trivial orbit-point bound dist(x, anchor)
  ActionSpec spec = make_affine_cloud_action(se3_basis());
  auto span = S.trajectory(0);
  WidthResult w = estimate_group_width(S, spec, span.front().state);
  double trivial_bound = 0.0;
  for (const auto& r : span)
    trivial_bound = std::max(trivial_bound, state_distance(r.state, span.front().state));
  CHECK(w.width <= trivial_bound + 1e-12);
}

TEST_CASE("transport snapshots have vanishing shift-group width") {
  BenchmarkConfig cfg;
  cfg.family = Family::transport;
  cfg.grid_size = 64;
  cfg.n_steps = 20;
  cfg.horizon = 1.0;
  cfg.mu1_values = {0.8};
  cfg.mu2_values = {2};
  SnapshotSet S = gen_linear_transport(cfg);
  WidthResult w = width_over_initial_conditions(S, make_grid_translation_action());
  CHECK(w.width < 1e-8);
}
