#include <doctest.h>

#include <cmath>

#include "ddsim/avg_hamiltonian.hpp"
#include "ddsim/spin_algebra.hpp"

using namespace ddsim;

TEST_CASE("propagator distance ignores a global phase") {
  const DenseMatrix U = collective_spin_operators(1.5).x.to_dense();
  const DenseMatrix V = expm_hermitian(U, 0.3);
  CHECK(propagator_distance(V, std::exp(Complex(0, 1.1)) * V) < 1e-12);
  CHECK(propagator_distance(V, DenseMatrix::Identity(4, 4)) > 0.1);
}

TEST_CASE("noiseless cycle equals the interaction term") {
  BecModel m{6.0, -0.5, 2 * kPi / 0.05, 1.0};
  const FerTerms f = classical_fer_terms(m, Vec3::Zero());
  const DenseMatrix U = cycle_propagator_exact(m, uni_dd(0.05, 1), Vec3::Zero());
  CHECK(propagator_distance(U, expm_hermitian(f.Hbar, 0.1)) < 1e-10);
}

TEST_CASE("averaged Hamiltonian of the classical model") {
  BecModel m{2.0, -0.5, 100.0, 1.0};
  const Vec3 b(0.3, 0.4, 0.5);
  const FerTerms f = classical_fer_terms(m, b);
  const SpinOps ops = collective_spin_operators(2.0);
  const DenseMatrix ref = -0.5 * ops.sq.to_dense() + (0.5 / 100.0) * 0.4 * ops.y.to_dense();
  CHECK(max_abs(DenseMatrix(f.Hbar - ref)) < 1e-14);
  CHECK(max_abs(DenseMatrix(f.HF0 - 0.5 * ops.z.to_dense())) < 1e-14);
}

TEST_CASE("suppression improves along the octave ladder") {
  const auto ladder = octave_ladder(2 * kPi / 0.05, 3);
  CHECK(ladder[2] == doctest::Approx(4 * 2 * kPi / 0.05));
  BecModel m;
  m.J = 5.0;
  const auto rows = suppression_factor(m, Vec3(0.5, -0.6, 0.4), ladder);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    CHECK(rows[k].distance < rows[k - 1].distance);
    CHECK(rows[k].tau == doctest::Approx(2 * kPi / rows[k].omega));
  }
  CHECK(rows[0].distance < 0.05);
}

TEST_CASE("quantum averaged Hamiltonian at N = 4") {
  HyperfineGrid g;
  g.nx = 2;
  g.ny = 2;
  QdModel q = make_qd_model(g, 0.0, 0.0, 1);
  const auto rows = suppression_factor(q, octave_ladder(2 * kPi / 0.05, 2));
  CHECK(rows[0].distance < 0.05);
  CHECK(rows[1].distance < rows[0].distance / 4);
}
