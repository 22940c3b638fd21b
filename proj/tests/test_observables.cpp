#include <doctest.h>

#include <cmath>

#include "ddsim/observables.hpp"
#include "ddsim/spin_algebra.hpp"

using namespace ddsim;

TEST_CASE("spin average and squeezing of a coherent state") {
  const double J = 30.0;
  const SparseSpinOps ops = sparse_spin_operators(J);
  const StateVector x = coherent_spin_state(J, Vec3::UnitX());
  CHECK(spin_average(x, ops, J) == doctest::Approx(1.0));
  // fixed-axes minimum picks the mean direction, where the variance vanishes
  CHECK(squeezing(x, ops, J) < 1e-10);
  const StateVector d = coherent_spin_state(J, Vec3(1, 1, 1).normalized());
  CHECK(squeezing(d, ops, J) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("central spin reduced state and fidelity") {
  // |psi> = (|up, up> + |down, down>) / sqrt 2 on one bath spin: maximally mixed centre
  ComplexVector v = ComplexVector::Zero(4);
  v(0) = v(3) = 1 / std::sqrt(2.0);
  const StateVector bell(v);
  const Eigen::Matrix2cd rho = central_spin_state(bell, 1);
  CHECK(std::abs(rho(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(rho(0, 1)) < 1e-15);
  Eigen::Matrix2cd up = Eigen::Matrix2cd::Zero();
  up(0, 0) = 1.0;
  CHECK(fidelity(up, bell, 1) == doctest::Approx(0.5));
  ComplexVector w = ComplexVector::Zero(4);
  w(1) = 1.0;  // |up, down>
  CHECK(fidelity(up, StateVector(w), 1) == doctest::Approx(1.0));
}

TEST_CASE("worst case aggregation") {
  const std::vector<std::vector<double>> s = {{1, 0.5, 0.7}, {0.9, 0.8, 0.2}};
  CHECK(worst_case(s, Aggregation::min) == std::vector<double>{0.9, 0.5, 0.2});
  CHECK(worst_case(s, Aggregation::max) == std::vector<double>{1, 0.8, 0.7});
}

TEST_CASE("characteristic time interpolates the first crossing") {
  const std::vector<double> t = {0, 1, 2, 3};
  const auto a = characteristic_time(t, {1.0, 0.95, 0.85, 0.5}, 0.9, Crossing::falling);
  REQUIRE(a.reached());
  CHECK(*a.value == doctest::Approx(1.5));
  const auto b = characteristic_time(t, {1.0, 0.99, 0.98, 0.97}, 0.9, Crossing::falling);
  CHECK(!b.reached());
  CHECK(b.value_or_horizon() == 3.0);
  const auto c = characteristic_time(t, {0.0, 0.02, 0.08, 0.1}, 0.05, Crossing::rising);
  CHECK(*c.value == doctest::Approx(1.5));
}

TEST_CASE("register metrics from raw samples") {
  Trajectory tr;
  tr.times = {0.0};
  Eigen::VectorXd s(kRegisterSampleWidth);
  // x: pure, y: pure, z: rho_00 = 0.9, -z: rho_11 = 0.8
  s << 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.0, -0.5, 0.9, 0.1, 0.0, 0.0, 0.2, 0.8, 0.0, 0.0;
  tr.samples = {s};
  const auto m = register_metrics(tr);
  REQUIRE(m.size() == 1);
  CHECK(m[0].worst[0] == doctest::Approx(0.8));
  CHECK(worst_fidelity(s) == doctest::Approx(0.8));
}
