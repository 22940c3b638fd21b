#pragma once

#include <cstddef>

#include "ddsim/linalg.hpp"

namespace ddsim {

// Basis conventions used everywhere in ddsim:
//  * collective spin: |J, m> with m descending, row 0 is m = +J;
//  * spin-1/2 registers: site 0 (the central spin) is the most significant tensor
//    factor, i.e. |s_0 s_1 ... s_N> has index sum_k s_k 2^(N-k) with s = 0 for up.

/// Rotation by angle about a unit axis.
class Rotation {
 public:
  // Throws unless |axis| = 1 within 1e-12.
  Rotation(const Vec3& axis, double angle);

  // Normalizes axis first.
  static Rotation about(const Vec3& axis, double angle);

  const Vec3& axis() const { return axis_; }
  double angle() const { return angle_; }

  Rotation inverse() const { return Rotation(axis_, -angle_); }

 private:
  Vec3 axis_;
  double angle_;
};

struct SpinOps {
  double J = 0.0;
  Operator x, y, z, sq;
  Index dim() const { return x.dim(); }
};

// Sparse Jx, Jy, Jz for one collective spin, used on the large-J paths.
struct SparseSpinOps {
  double J = 0.0;
  SparseMatrix x, y, z;
  Index dim() const { return x.rows(); }
};

// Throws unless 2J is a positive integer.
int twice_spin(double J);

SpinOps collective_spin_operators(double J);
SparseSpinOps sparse_spin_operators(double J);

Eigen::Matrix2cd spin_half_x();
Eigen::Matrix2cd spin_half_y();
Eigen::Matrix2cd spin_half_z();

// Embeds a 2x2 operator at site k of an (N+1)-site spin-1/2 register.
Operator single_site_operator(int N, int k, const Eigen::Matrix2cd& local);

// exp(-i angle axis.J); closed form for spin-1/2, eigendecomposition otherwise.
Operator rotation_operator(const Rotation& rot, const SpinOps& ops);
Eigen::Matrix2cd spin_half_rotation(const Rotation& rot);

// Heisenberg action on the spin vector: U^dagger J U = R J for U = exp(-i angle axis.J),
// so expectation values transform as <J> -> R <J>.
Mat3 so3_matrix(const Rotation& rot);

// A rotation carrying unit vector `from` onto `to`. Antiparallel pairs use a
// rotation by pi about a fixed perpendicular axis (x unless from is along x).
Rotation rotation_between(const Vec3& from, const Vec3& to);

// Rotate a collective-spin state (Chebyshev on the sparse generator).
StateVector rotate_state(const StateVector& psi, const Rotation& rot, const SparseSpinOps& ops);

StateVector coherent_spin_state(double J, const Vec3& direction);

/// First and symmetrized second moments of the collective spin:
/// mean(a) = <J_a>, second(a, b) = Re <J_a J_b>.
struct SpinMoments {
  Vec3 mean = Vec3::Zero();
  Mat3 second = Mat3::Zero();

  Mat3 covariance() const { return second - mean * mean.transpose(); }
  // Moments after the state is acted on by a rotation with SO(3) matrix r.
  SpinMoments rotated(const Mat3& r) const { return {r * mean, r * second * r.transpose()}; }
};

SpinMoments spin_moments(const StateVector& psi, const SparseSpinOps& ops);

enum class SqueezingMethod { one_axis, two_axis };

struct SqueezingOptions {
  SqueezingMethod method = SqueezingMethod::two_axis;
  // Mean spin of the returned state. The squeezed quadrature is aligned with a
  // laboratory axis: x for a +-z mean, z for a +-x mean, x for a +-y mean.
  Vec3 mean_axis = Vec3::UnitX();
  double tolerance = 1e-3;  // relative, on the achieved xi^2
};

struct SqueezedState {
  StateVector state;
  double theta = 0.0;   // twisting strength
  double xi2 = 1.0;     // achieved transverse squeezing
};

// Twists a coherent state until the transverse (minimum perpendicular variance)
// squeezing reaches target_xi2. Throws std::invalid_argument naming the minimum
// achievable value when the target lies below it.
SqueezedState squeezed_spin_state(double J, double target_xi2, const SqueezingOptions& opts = {});

// Transverse squeezing 2 min_{n perp <J>} Var(n.J) / J.
double transverse_squeezing(const SpinMoments& m, double J);

}  // namespace ddsim
