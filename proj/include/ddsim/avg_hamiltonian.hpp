#pragma once

#include <vector>

#include "ddsim/models.hpp"
#include "ddsim/sequences.hpp"

namespace ddsim {

/// Fer terms of one delay and the cycle-averaged Hamiltonian of [Y U Y U] at the
/// magic condition.
struct FerTerms {
  DenseMatrix HF0;
  DenseMatrix HF1;
  DenseMatrix Hbar;
  double omega = 0.0;
};

// H_F0 = gamma b_z J_z, H_F1 = gamma (b_z/B)(b_x J_x + b_y J_y) + gamma J_z (b_x^2 + b_y^2)/(2B),
// Hbar = c2' J^2 + (b_z/B) gamma b_y J_y, with B = omega / gamma.
FerTerms classical_fer_terms(const BecModel& model, const Vec3& b);

// Built from the Overhauser operators h_a; dipolar bonds are ignored. N <= 10.
FerTerms quantum_fer_terms(const QdModel& model);

// Literal product of the delay and pulse unitaries of `cycle` (dense).
DenseMatrix cycle_propagator_exact(const BecModel& model, const Sequence& cycle, const Vec3& b);
DenseMatrix cycle_propagator_exact(const QdModel& model, const Sequence& cycle);

// min over a global phase of ||U - e^{i phi} V||_2, with phi = arg Tr(V^dagger U).
double propagator_distance(const DenseMatrix& U, const DenseMatrix& V);

struct SuppressionRow {
  double omega = 0.0;
  double tau = 0.0;
  double distance = 0.0;        // d(omega) = ||U_2tau - exp(-i 2 tau Hbar)||_2
  double coupling_ratio = 0.0;  // effective over bare noise coupling
};

// One row per omega on the magic line tau = 2 pi / omega.
std::vector<SuppressionRow> suppression_factor(const BecModel& model, const Vec3& b, const std::vector<double>& omegas);
std::vector<SuppressionRow> suppression_factor(const QdModel& model, const std::vector<double>& omegas);

// omega_k = omega0 * 2^k, k = 0 .. count - 1
std::vector<double> octave_ladder(double omega0, int count);

}  // namespace ddsim
