#include <doctest.h>

#include <cmath>

#include "ddsim/spin_algebra.hpp"

using namespace ddsim;

namespace {
DenseMatrix d(const Operator& o) { return o.to_dense(); }
}  // namespace

TEST_CASE("su(2) commutators and Casimir") {
  for (double J : {0.5, 1.0, 3.5, 10.0}) {
    const SpinOps ops = collective_spin_operators(J);
    const DenseMatrix x = d(ops.x), y = d(ops.y), z = d(ops.z), sq = d(ops.sq);
    CHECK(max_abs(DenseMatrix(commutator(x, y) - kI * z)) < 1e-10);
    CHECK(max_abs(DenseMatrix(commutator(y, z) - kI * x)) < 1e-10);
    CHECK(max_abs(DenseMatrix(commutator(z, x) - kI * y)) < 1e-10);
    CHECK(max_abs(DenseMatrix(sq - J * (J + 1) * DenseMatrix::Identity(sq.rows(), sq.cols()))) < 1e-10);
    CHECK(max_abs(commutator(sq, x)) < 1e-10);
    CHECK(max_abs(commutator(sq, z)) < 1e-10);
    CHECK(ops.dim() == static_cast<Index>(2 * J + 1));
  }
}

TEST_CASE("spin must be a half-integer") {
  CHECK_THROWS_AS(twice_spin(0.3), std::invalid_argument);
  CHECK_THROWS_AS(twice_spin(0.0), std::invalid_argument);
  CHECK(twice_spin(2.5) == 5);
}

TEST_CASE("rotations are unitary and match the SO(3) action") {
  const SpinOps ops = collective_spin_operators(2.0);
  const Rotation rot = Rotation::about(Vec3(0.3, -0.5, 0.8), 1.234);
  const DenseMatrix U = d(rotation_operator(rot, ops));
  CHECK(max_abs(DenseMatrix(U.adjoint() * U - DenseMatrix::Identity(U.rows(), U.cols()))) < 1e-10);

  const Mat3 R = so3_matrix(rot);
  CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK(R.determinant() == doctest::Approx(1.0));
  // U^dagger J_a U = sum_b R_ab J_b
  const DenseMatrix J[3] = {d(ops.x), d(ops.y), d(ops.z)};
  for (int a = 0; a < 3; ++a) {
    DenseMatrix rhs = R(a, 0) * J[0] + R(a, 1) * J[1] + R(a, 2) * J[2];
    CHECK(max_abs(DenseMatrix(U.adjoint() * J[a] * U - rhs)) < 1e-10);
  }
}

TEST_CASE("spin-1/2 closed form equals the general rotation") {
  const Rotation rot = Rotation::about(Vec3(1, 2, -0.5), 2.2);
  const DenseMatrix general = d(rotation_operator(rot, collective_spin_operators(0.5)));
  CHECK(max_abs(DenseMatrix(general - DenseMatrix(spin_half_rotation(rot)))) < 1e-12);
  // a pi pulse about y is -i sigma_y
  const Eigen::Matrix2cd Y = spin_half_rotation(Rotation(Vec3::UnitY(), kPi));
  CHECK(std::abs(Y(0, 1) + 1.0) < 1e-15);
  CHECK(std::abs(Y(1, 0) - 1.0) < 1e-15);
}

TEST_CASE("rotation_between maps the vectors") {
  const Vec3 z = Vec3::UnitZ();
  for (const Vec3& to : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, -1), Vec3(0.6, 0, 0.8), Vec3(0, 0, 1)})
    CHECK((so3_matrix(rotation_between(z, to)) * z - to).norm() < 1e-12);
  CHECK_THROWS(Rotation(Vec3(1, 1, 0), 0.1));
}

TEST_CASE("coherent spin state mean and variance") {
  const double J = 25.0;
  const SparseSpinOps ops = sparse_spin_operators(J);
  for (const Vec3& n : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0.48, -0.6, 0.64)}) {
    const SpinMoments m = spin_moments(coherent_spin_state(J, n), ops);
    CHECK((m.mean - J * n).norm() < 1e-10);
    // Var(n.J) = 0, transverse variances J / 2
    const Mat3 c = m.covariance();
    CHECK(std::abs(n.dot(c * n)) < 1e-9);
    CHECK(c.trace() == doctest::Approx(J).epsilon(1e-12));
    CHECK(transverse_squeezing(m, J) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("squeezed states reach the requested transverse squeezing") {
  for (auto method : {SqueezingMethod::one_axis, SqueezingMethod::two_axis}) {
    SqueezingOptions o;
    o.method = method;
    o.mean_axis = Vec3::UnitZ();
    const SqueezedState s = squeezed_spin_state(100.0, 0.1, o);
    const SpinMoments m = spin_moments(s.state, sparse_spin_operators(100.0));
    CHECK(transverse_squeezing(m, 100.0) == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(m.mean.normalized().dot(Vec3::UnitZ()) > 1 - 1e-9);
  }
  // below the twisting floor
  CHECK_THROWS_AS(squeezed_spin_state(10.0, 1e-4), std::invalid_argument);
}

TEST_CASE("two-axis twisting floor") {
  // minimum transverse squeezing reached by two-axis twisting (frozen)
  SqueezingOptions o;
  o.mean_axis = Vec3::UnitZ();
  o.tolerance = 1e-4;
  CHECK_NOTHROW(squeezed_spin_state(100.0, 0.0095, o));
  CHECK_THROWS(squeezed_spin_state(100.0, 0.0085, o));
}
