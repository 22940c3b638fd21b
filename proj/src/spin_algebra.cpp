#include "ddsim/spin_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ddsim/chebyshev.hpp"

namespace ddsim {

namespace {

constexpr double kUnitTol = 1e-12;
constexpr double kRotateTol = 1e-14;

SparseMatrix diagonal_sparse(const Eigen::VectorXd& d) {
  SparseMatrix m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Index i = 0; i < d.size(); ++i) m.insert(i, i) = d(i);
  m.makeCompressed();
  return m;
}

// J+ |J,m> = sqrt(J(J+1) - m(m+1)) |J,m+1>; row i has m = J - i.
SparseMatrix raising(double J) {
  const Index d = twice_spin(J) + 1;
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(d);
  for (Index i = 1; i < d; ++i) {
    const double m = J - static_cast<double>(i);
    trip.emplace_back(i - 1, i, std::sqrt(J * (J + 1.0) - m * (m + 1.0)));
  }
  SparseMatrix jp(d, d);
  jp.setFromTriplets(trip.begin(), trip.end());
  return jp;
}

SparseMatrix generator(const SparseSpinOps& ops, const Vec3& n) {
  SparseMatrix g = n.x() * ops.x + n.y() * ops.y + n.z() * ops.z;
  g.makeCompressed();
  return g;
}

// Log of the CSS amplitude magnitude; -inf when it vanishes.
double log_css_amplitude(int two_j, int k, double log_cos, double log_sin) {
  const double n = two_j;
  const double binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  const double up = n - k;  // J + m
  const double down = k;    // J - m
  double value = 0.5 * binom;
  if (up > 0) value += up * log_cos;
  if (down > 0) value += down * log_sin;
  return value;
}

}  // namespace

Rotation::Rotation(const Vec3& axis, double angle) : axis_(axis), angle_(angle) {
  if (!(std::abs(axis.norm() - 1.0) <= kUnitTol)) throw std::invalid_argument("Rotation: axis is not a unit vector");
  if (!std::isfinite(angle)) throw std::invalid_argument("Rotation: non-finite angle");
}

Rotation Rotation::about(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw std::invalid_argument("Rotation: zero axis");
  return Rotation(axis / n, angle);
}

int twice_spin(double J) {
  const double two = 2.0 * J;
  const double rounded = std::round(two);
  if (!(J >= 0.5) || std::abs(two - rounded) > 1e-12)
    throw std::invalid_argument("spin quantum number must be a positive integer or half-integer, got " +
                                std::to_string(J));
  return static_cast<int>(rounded);
}

SparseSpinOps sparse_spin_operators(double J) {
  const int two_j = twice_spin(J);
  const Index d = two_j + 1;
  Eigen::VectorXd m(d);
  for (Index i = 0; i < d; ++i) m(i) = J - static_cast<double>(i);
  const SparseMatrix jp = raising(J);
  const SparseMatrix jm = jp.adjoint();
  SparseSpinOps ops;
  ops.J = J;
  ops.x = 0.5 * (jp + jm);
  ops.y = Complex(0.0, -0.5) * (jp - jm);
  ops.z = diagonal_sparse(m);
  ops.x.makeCompressed();
  ops.y.makeCompressed();
  return ops;
}

SpinOps collective_spin_operators(double J) {
  const SparseSpinOps s = sparse_spin_operators(J);
  const DenseMatrix x(s.x), y(s.y), z(s.z);
  const DenseMatrix sq = x * x + y * y + z * z;
  SpinOps ops;
  ops.J = J;
  ops.x = Operator::automatic(x, true);
  ops.y = Operator::automatic(y, true);
  ops.z = Operator::automatic(z, true);
  ops.sq = Operator::automatic(sq, true);
  return ops;
}

Eigen::Matrix2cd spin_half_x() {
  Eigen::Matrix2cd m;
  m << 0.0, 0.5, 0.5, 0.0;
  return m;
}

Eigen::Matrix2cd spin_half_y() {
  Eigen::Matrix2cd m;
  m << Complex(0.0), Complex(0.0, -0.5), Complex(0.0, 0.5), Complex(0.0);
  return m;
}

Eigen::Matrix2cd spin_half_z() {
  Eigen::Matrix2cd m;
  m << 0.5, 0.0, 0.0, -0.5;
  return m;
}

Operator single_site_operator(int N, int k, const Eigen::Matrix2cd& local) {
  if (N < 0 || k < 0 || k > N)
    throw std::out_of_range("single_site_operator: site " + std::to_string(k) + " outside 0.." + std::to_string(N));
  if (N > 30) throw ResourceError("single_site_operator: register too large");
  const Index dim = Index{1} << (N + 1);
  const int shift = N - k;
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(dim) * 2);
  for (Index col = 0; col < dim; ++col) {
    const int b = static_cast<int>((col >> shift) & 1);
    for (int a = 0; a < 2; ++a) {
      const Complex v = local(a, b);
      if (v == Complex(0.0)) continue;
      const Index row = (col & ~(Index{1} << shift)) | (Index{a} << shift);
      trip.emplace_back(row, col, v);
    }
  }
  SparseMatrix m(dim, dim);
  m.setFromTriplets(trip.begin(), trip.end());
  const bool herm = (local - local.adjoint()).cwiseAbs().maxCoeff() <= kUnitTol;
  return Operator(std::move(m), herm);
}

Eigen::Matrix2cd spin_half_rotation(const Rotation& rot) {
  const Vec3& n = rot.axis();
  const double c = std::cos(0.5 * rot.angle());
  const double s = std::sin(0.5 * rot.angle());
  Eigen::Matrix2cd u;
  // cos(a/2) I - i sin(a/2) n.sigma
  u(0, 0) = Complex(c, -s * n.z());
  u(0, 1) = Complex(-s * n.y(), -s * n.x());
  u(1, 0) = Complex(s * n.y(), -s * n.x());
  u(1, 1) = Complex(c, s * n.z());
  return u;
}

Operator rotation_operator(const Rotation& rot, const SpinOps& ops) {
  const Index d = ops.dim();
  if (ops.y.dim() != d || ops.z.dim() != d) throw std::invalid_argument("rotation_operator: spin operator dims differ");
  if (d == 2) return Operator(DenseMatrix(spin_half_rotation(rot)));
  const Vec3& n = rot.axis();
  const DenseMatrix gen = n.x() * ops.x.to_dense() + n.y() * ops.y.to_dense() + n.z() * ops.z.to_dense();
  return Operator::automatic(expm_hermitian(gen, rot.angle()));
}

Mat3 so3_matrix(const Rotation& rot) {
  const Vec3& k = rot.axis();
  Mat3 kx;
  kx << 0.0, -k.z(), k.y(), k.z(), 0.0, -k.x(), -k.y(), k.x(), 0.0;
  return Mat3::Identity() + std::sin(rot.angle()) * kx + (1.0 - std::cos(rot.angle())) * kx * kx;
}

Rotation rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const Vec3 cross = a.cross(b);
  const double sin_angle = cross.norm();
  const double cos_angle = a.dot(b);
  if (sin_angle < 1e-14) {
    if (cos_angle > 0.0) return Rotation(Vec3::UnitZ(), 0.0);
    const Vec3 perp = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return Rotation::about(perp - perp.dot(a) * a, kPi);
  }
  return Rotation::about(cross, std::atan2(sin_angle, cos_angle));
}

StateVector rotate_state(const StateVector& psi, const Rotation& rot, const SparseSpinOps& ops) {
  if (psi.dim() != ops.dim()) throw std::invalid_argument("rotate_state: dimension mismatch");
  if (rot.angle() == 0.0) return psi;
  auto gen = std::make_shared<const SparseMatrix>(generator(ops, rot.axis()));
  ChebyshevExpm prop(gen, rot.angle(), kRotateTol, 1.0);
  ComplexBlock block = psi.amplitudes();
  prop.apply(block);
  return StateVector::normalized(block.col(0));
}

StateVector coherent_spin_state(double J, const Vec3& direction) {
  const int two_j = twice_spin(J);
  const double n = direction.norm();
  if (!(std::abs(n - 1.0) <= 1e-10)) throw std::invalid_argument("coherent_spin_state: direction is not a unit vector");
  const Vec3 dir = direction / n;
  const double theta = std::acos(std::clamp(dir.z(), -1.0, 1.0));
  const double phi = std::atan2(dir.y(), dir.x());
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);

  ComplexVector amp = ComplexVector::Zero(two_j + 1);
  if (s == 0.0) {
    amp(0) = 1.0;
  } else if (c == 0.0) {
    amp(two_j) = 1.0;
  } else {
    const double lc = std::log(c);
    const double ls = std::log(s);
    for (int k = 0; k <= two_j; ++k) {
      const double m = J - k;
      const double mag = std::exp(log_css_amplitude(two_j, k, lc, ls));
      amp(k) = mag * std::exp(Complex(0.0, -m * phi));
    }
  }
  return StateVector::normalized(std::move(amp));
}

SpinMoments spin_moments(const StateVector& psi, const SparseSpinOps& ops) {
  if (psi.dim() != ops.dim()) throw std::invalid_argument("spin_moments: dimension mismatch");
  const ComplexVector& v = psi.amplitudes();
  const ComplexVector a[3] = {ops.x * v, ops.y * v, ops.z * v};
  SpinMoments m;
  for (int i = 0; i < 3; ++i) {
    m.mean(i) = v.dot(a[i]).real();
    for (int j = i; j < 3; ++j) {
      const double s = a[i].dot(a[j]).real();
      m.second(i, j) = s;
      m.second(j, i) = s;
    }
  }
  return m;
}

double transverse_squeezing(const SpinMoments& m, double J) {
  const double len = m.mean.norm();
  const Mat3 cov = m.covariance();
  Vec3 n = len > 0.0 ? Vec3(m.mean / len) : Vec3::UnitZ();
  Vec3 e1 = n.unitOrthogonal();
  Vec3 e2 = n.cross(e1);
  Eigen::Matrix2d c;
  c << e1.dot(cov * e1), e1.dot(cov * e2), e2.dot(cov * e1), e2.dot(cov * e2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c);
  return 2.0 * es.eigenvalues()(0) / J;
}

namespace {

// Advances a twisted state by dtheta.
class Twister {
 public:
  Twister(double J, SqueezingMethod method) : J_(J), method_(method), ops_(sparse_spin_operators(J)) {
    if (method_ == SqueezingMethod::two_axis) {
      SparseMatrix h = ops_.x * ops_.y + ops_.y * ops_.x;
      h.makeCompressed();
      tat_ = std::make_shared<const SparseMatrix>(std::move(h));
    }
  }

  const SparseSpinOps& ops() const { return ops_; }

  // Untwisted starting state: mean along +z for two-axis, +x for one-axis.
  StateVector start() const {
    return coherent_spin_state(J_, method_ == SqueezingMethod::two_axis ? Vec3::UnitZ() : Vec3::UnitX());
  }

  StateVector advance(const StateVector& psi, double dtheta) const {
    if (dtheta == 0.0) return psi;
    if (method_ == SqueezingMethod::one_axis) {
      ComplexVector v = psi.amplitudes();
      for (Index i = 0; i < v.size(); ++i) {
        const double m = J_ - static_cast<double>(i);
        v(i) *= std::exp(Complex(0.0, -dtheta * m * m));
      }
      return StateVector::normalized(std::move(v));
    }
    ChebyshevExpm prop(tat_, dtheta, kRotateTol, 1.0);
    ComplexBlock block = psi.amplitudes();
    prop.apply(block);
    return StateVector::normalized(block.col(0));
  }

  double xi2(const StateVector& psi) const { return transverse_squeezing(spin_moments(psi, ops_), J_); }

  double step() const {
    return method_ == SqueezingMethod::two_axis ? 0.02 / J_ : 0.01 * std::pow(J_, -2.0 / 3.0);
  }

 private:
  double J_;
  SqueezingMethod method_;
  SparseSpinOps ops_;
  std::shared_ptr<const SparseMatrix> tat_;
};

// Mean to +z, minimum transverse variance onto +x, then mean onto the requested axis.
StateVector orient(const StateVector& psi, const SparseSpinOps& ops, const Vec3& mean_axis) {
  SpinMoments m = spin_moments(psi, ops);
  StateVector out = rotate_state(psi, rotation_between(m.mean, Vec3::UnitZ()), ops);
  m = spin_moments(out, ops);
  const Mat3 cov = m.covariance();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov.topLeftCorner<2, 2>());
  const Eigen::Vector2d u = es.eigenvectors().col(0);
  const double alpha = std::atan2(u.y(), u.x());
  out = rotate_state(out, Rotation(Vec3::UnitZ(), -alpha), ops);
  return rotate_state(out, rotation_between(Vec3::UnitZ(), mean_axis), ops);
}

}  // namespace

SqueezedState squeezed_spin_state(double J, double target_xi2, const SqueezingOptions& opts) {
  if (!(target_xi2 > 0.0) || target_xi2 > 1.0)
    throw std::invalid_argument("squeezed_spin_state: target xi^2 must lie in (0, 1]");
  const Vec3 axis = opts.mean_axis.normalized();
  if (target_xi2 >= 1.0 - 1e-12) return {coherent_spin_state(J, axis), 0.0, 1.0};

  const Twister tw(J, opts.method);
  const double step = tw.step();
  StateVector prev = tw.start();
  double prev_theta = 0.0;
  double prev_xi2 = 1.0;
  double best = 1.0;
  const std::size_t max_steps = 100000;
  for (std::size_t k = 1; k <= max_steps; ++k) {
    StateVector cur = tw.advance(prev, step);
    const double theta = prev_theta + step;
    const double xi2 = tw.xi2(cur);
    if (xi2 <= target_xi2) {
      // Bisect on [prev_theta, theta], twisting forward from prev.
      double lo = 0.0;
      double hi = step;
      double hi_xi2 = xi2;
      StateVector hi_state = cur;
      for (int it = 0; it < 60 && std::abs(hi_xi2 - target_xi2) > opts.tolerance * target_xi2 * 0.1; ++it) {
        const double mid = 0.5 * (lo + hi);
        StateVector s = tw.advance(prev, mid);
        const double x = tw.xi2(s);
        if (x <= target_xi2) {
          hi = mid;
          hi_xi2 = x;
          hi_state = std::move(s);
        } else {
          lo = mid;
        }
      }
      return {orient(hi_state, tw.ops(), axis), prev_theta + hi, hi_xi2};
    }
    best = std::min(best, xi2);
    // Past the minimum and climbing into anti-squeezing: the target is unreachable.
    if (xi2 > prev_xi2 && xi2 > 1.5 * best) {
      throw std::invalid_argument("squeezed_spin_state: target xi^2 = " + std::to_string(target_xi2) +
                                  " is below the minimum achievable " + std::to_string(best) + " at J = " +
                                  std::to_string(J));
    }
    prev = std::move(cur);
    prev_theta = theta;
    prev_xi2 = xi2;
  }
  throw std::invalid_argument("squeezed_spin_state: twisting scan did not terminate");
}

}  // namespace ddsim
