#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "morlie/group_actions.hpp"

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

GroupElement random_group(std::mt19937& rng, const ActionSpec& spec, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector c(spec.group_dim());
  for (int i = 0; i < c.size(); ++i) c(i) = u(rng);
  return exp_for_action(spec, spec.group_basis.combine(c));
}

Vector fd_generator(const ActionSpec& spec, const AlgebraElement& a, const StatePoint& x,
                    double h = 1e-6) {
  StatePoint plus = apply_action(spec, exp_for_action(spec, AlgebraElement(h * a.mat)), x);
  StatePoint minus = apply_action(spec, exp_for_action(spec, AlgebraElement(-h * a.mat)), x);
  return (plus.coords - minus.coords) / (2.0 * h);
}

Vector sampled(double (*f)(double), int n) {
  Vector u(n);
  for (int i = 0; i < n; ++i) u(i) = f(2.0 * M_PI * i / n);
  return u;
}

}  // namespace

TEST_CASE("identity acts trivially") {
  std::mt19937 rng(1);
  StatePoint x = random_cloud(rng, 5);
  ActionSpec spec = make_affine_cloud_action();
  StatePoint y = apply_action(spec, GroupElement::identity(4), x);
  CHECK((y.coords - x.coords).norm() == 0.0);

  StatePoint q = make_polar(1.5, 0.3);
  ActionSpec polar = make_so2_polar_action();
  CHECK((apply_action(polar, GroupElement::identity(2), q).coords - q.coords).norm() == 0.0);

  StatePoint u = make_grid(sampled(std::sin, 64));
  ActionSpec grid = make_grid_translation_action();
  CHECK((apply_action(grid, GroupElement::identity(2), u).coords - u.coords).norm() < 1e-12);
}

TEST_CASE("a translation moves every particle") {
  Vector coords = Vector::Zero(6);
  StatePoint x = make_pointcloud(coords);
  ActionSpec spec = make_affine_cloud_action();
  Matrix g = Matrix::Identity(4, 4);
  g(0, 3) = 1.0;
  StatePoint y = apply_action(spec, GroupElement(g), x);
  for (int i = 0; i < 2; ++i) {
    CHECK(y.coords(3 * i) == 1.0);
    CHECK(y.coords(3 * i + 1) == 0.0);
    CHECK(y.coords(3 * i + 2) == 0.0);
  }
}

TEST_CASE("quarter-period spectral shift turns sin into cos") {
  const int n = 128;
  StatePoint u = make_grid(sampled(std::sin, n));
  ActionSpec grid = make_grid_translation_action();
  Matrix g = Matrix::Identity(2, 2);
  g(0, 1) = M_PI / 2.0;  // u(x + pi/2) = cos(x)
  StatePoint v = apply_action(grid, GroupElement(g), u);
  CHECK((v.coords - sampled(std::cos, n)).norm() < 1e-10);
}

TEST_CASE("generator of a pure translation is the same velocity on every particle") {
  std::mt19937 rng(2);
  StatePoint x = random_cloud(rng, 7);
  ActionSpec spec = make_affine_cloud_action();
  Matrix a = Matrix::Zero(4, 4);
  a(0, 3) = 1.0;
  Vector v = infinitesimal_generator(spec, AlgebraElement(a), x);
  for (int i = 0; i < x.count; ++i) {
    CHECK(v(3 * i) == 1.0);
    CHECK(v(3 * i + 1) == 0.0);
  }
  Vector fd = fd_generator(spec, AlgebraElement(a), x);
  CHECK((v - fd).norm() < 1e-8 * (1.0 + v.norm()));
}

TEST_CASE("polar generator is vertical") {
  ActionSpec polar = make_so2_polar_action();
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 0.7;  // coefficient omega
  Vector v = infinitesimal_generator(polar, AlgebraElement(a), make_polar(2.0, 1.0));
  CHECK(v(0) == 0.0);
  CHECK(v(1) == 0.7);
}

TEST_CASE("zero algebra element generates zero velocity") {
  std::mt19937 rng(3);
  StatePoint x = random_cloud(rng, 4);
  ActionSpec spec = make_affine_cloud_action();
  CHECK(infinitesimal_generator(spec, AlgebraElement(Matrix::Zero(4, 4)), x).norm() == 0.0);
}

TEST_CASE("generator matrix of so2_polar is the single column (0, 1)") {
  ActionSpec polar = make_so2_polar_action();
  Matrix cols = generator_matrix_at(polar, make_polar(3.0, -0.2));
  REQUIRE(cols.cols() == 1);
  CHECK(cols(0, 0) == 0.0);
  CHECK(cols(1, 0) == 1.0);
}

TEST_CASE("generator matrix at the origin splits translation and linear parts") {
  StatePoint x = make_pointcloud(Vector::Zero(3));
  ActionSpec spec = make_affine_cloud_action();
  Matrix cols = generator_matrix_at(spec, x);
  REQUIRE(cols.rows() == 3);
  REQUIRE(cols.cols() == 12);
  // aff3_basis orders the nine linear generators first, then translations
  CHECK(cols.leftCols(9).norm() == 0.0);
  CHECK((cols.rightCols(3) - Matrix::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("generator matrix columns agree with finite differences") {
  std::mt19937 rng(5);
  StatePoint x = random_cloud(rng, 6);
  ActionSpec spec = make_affine_cloud_action();
  Matrix cols = generator_matrix_at(spec, x);
  for (int k = 0; k < spec.group_dim(); ++k) {
    Vector fd = fd_generator(spec, spec.group_basis.elements[k], x);
    CHECK((cols.col(k) - fd).norm() < 1e-8 * (1.0 + fd.norm()));
  }
}

TEST_CASE("homomorphism property holds on random triples") {
  std::mt19937 rng(8);
  ActionSpec affine = make_affine_cloud_action();
  for (int trial = 0; trial < 20; ++trial) {
    StatePoint x = random_cloud(rng, 5);
    GroupElement g = random_group(rng, affine, 0.6);
    GroupElement h = random_group(rng, affine, 0.6);
    StatePoint lhs = apply_action(affine, GroupElement(g.mat * h.mat), x);
    StatePoint rhs = apply_action(affine, g, apply_action(affine, h, x));
    CHECK(state_distance(lhs, rhs) <= 1e-10 * (1.0 + x.coords.norm()));
  }
  ActionSpec grid = make_grid_translation_action();
  StatePoint u = make_grid(sampled(std::sin, 64));
  for (int trial = 0; trial < 10; ++trial) {
    GroupElement g = random_group(rng, grid, 2.0);
    GroupElement h = random_group(rng, grid, 2.0);
    StatePoint lhs = apply_action(grid, GroupElement(g.mat * h.mat), u);
    StatePoint rhs = apply_action(grid, g, apply_action(grid, h, u));
    CHECK(state_distance(lhs, rhs) <= 1e-10 * (1.0 + u.coords.norm()));
  }
}

TEST_CASE("freeness witness: generic clouds of >=4 particles give rank 12") {
  std::mt19937 rng(9);
  StatePoint x = random_cloud(rng, 4);
  ActionSpec spec = make_affine_cloud_action();
  Eigen::ColPivHouseholderQR<Matrix> qr(generator_matrix_at(spec, x));
  CHECK(qr.rank() == 12);
}

TEST_CASE("product with the trivial group returns the original action") {
  ActionSpec affine = make_affine_cloud_action();
  affine.cluster_assignment.assign(6, 0);
  ActionSpec trivial;
  trivial.kind = ActionKind::affine_cloud;
  trivial.group_basis = AlgebraBasis{};
  ActionSpec prod = product_commuting({affine, trivial});
  CHECK(prod.group_dim() == affine.group_dim());
  CHECK(prod.kind == affine.kind);
}

TEST_CASE("product of two disjoint affine actions is a two-cluster action") {
  std::mt19937 rng(10);
  const int n = 8;
  ActionSpec a = make_affine_cloud_action();
  a.cluster_assignment.assign(n, -1);
  for (int i = 0; i < n / 2; ++i) a.cluster_assignment[i] = 0;
  ActionSpec b = make_affine_cloud_action();
  b.cluster_assignment.assign(n, -1);
  for (int i = n / 2; i < n; ++i) b.cluster_assignment[i] = 0;
  ActionSpec prod = product_commuting({a, b});
  CHECK(prod.kind == ActionKind::clustered_affine);
  CHECK(prod.n_clusters == 2);
  CHECK(prod.group_dim() == 24);

  StatePoint x = random_cloud(rng, n);
  for (int trial = 0; trial < 10; ++trial) {
    GroupElement g = random_group(rng, prod, 0.5);
    GroupElement h = random_group(rng, prod, 0.5);
    StatePoint lhs = apply_action(prod, GroupElement(g.mat * h.mat), x);
    StatePoint rhs = apply_action(prod, g, apply_action(prod, h, x));
    CHECK(state_distance(lhs, rhs) <= 1e-10 * (1.0 + x.coords.norm()));
  }
  // generator of the product agrees with finite differences of the product map
  for (int k = 0; k < prod.group_dim(); ++k) {
    Vector fd = fd_generator(prod, prod.group_basis.elements[k], x);
    Vector gen = infinitesimal_generator(prod, prod.group_basis.elements[k], x);
    CHECK((gen - fd).norm() < 1e-7 * (1.0 + fd.norm()));
  }
}

TEST_CASE("overlapping product blocks are rejected") {
  ActionSpec a = make_affine_cloud_action();
  a.cluster_assignment = {0, 0, -1};
  ActionSpec b = make_affine_cloud_action();
  b.cluster_assignment = {-1, 0, 0};
  CHECK_THROWS_AS(product_commuting({a, b}), std::invalid_argument);
}

TEST_CASE("chart mismatches are rejected") {
  ActionSpec spec = make_affine_cloud_action();
  CHECK_THROWS_AS(apply_action(spec, GroupElement::identity(4), make_polar(1.0, 0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_action(spec, GroupElement::identity(3), make_pointcloud(Vector::Zero(3))),
                  std::invalid_argument);
}

TEST_CASE("affine least squares recovers an exact map") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix truth = Matrix::Identity(4, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) truth(i, j) = u(rng);
  Matrix src(3, 6), dst(3, 6);
  for (int c = 0; c < 6; ++c) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng));
    src.col(c) = p;
    dst.col(c) = truth.block<3, 3>(0, 0) * p + truth.block<3, 1>(0, 3);
  }
  AffineFit fit = fit_affine_map(src, dst);
  CHECK(fit.rank_ok);
  CHECK((fit.transform - truth).norm() < 1e-12);
}

TEST_CASE("state distance matches hand arithmetic") {
  Vector a = Vector::Zero(6), b = Vector::Zero(6);
  b(0) = 1.0;  // particle 0 offset by norm 1
  b(3) = 3.0;  // particle 1 offset by norm 3
  CHECK(state_distance(make_pointcloud(a), make_pointcloud(b)) == doctest::Approx(2.0));
}

TEST_CASE("spectral derivative matches the analytic derivative of sin") {
  Vector du = spectral_derivative(sampled(std::sin, 64));
  CHECK((du - sampled(std::cos, 64)).norm() < 1e-10);
}
