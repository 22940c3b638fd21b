#include "ddsim/avg_hamiltonian.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include <unsupported/Eigen/KroneckerProduct>

#include "ddsim/spin_algebra.hpp"

namespace ddsim {

namespace {

constexpr int kMaxDenseSites = 10;

void require_bias(double omega, const char* who) {
  if (omega == 0.0 || !std::isfinite(omega)) throw std::invalid_argument(std::string(who) + ": omega must be nonzero");
}

// Multiplies delay and pulse unitaries in application order.
template <class DelayH, class PulseU>
DenseMatrix product(const Sequence& cycle, Index dim, DelayH&& hamiltonian, PulseU&& pulse) {
  cycle.validate();
  DenseMatrix u = DenseMatrix::Identity(dim, dim);
  std::map<std::pair<int, double>, DenseMatrix> delays;
  for (const auto& e : cycle.events) {
    if (e.is_delay()) {
      auto key = std::make_pair(e.bias_sign, e.duration);
      auto it = delays.find(key);
      if (it == delays.end()) it = delays.emplace(key, expm_hermitian(hamiltonian(e.bias_sign), e.duration)).first;
      u = it->second * u;
    } else {
      u = pulse(e.rotation) * u;
    }
  }
  return u;
}

DenseMatrix central_pulse(const Rotation& r, int N) {
  return Eigen::kroneckerProduct(spin_half_rotation(r), DenseMatrix::Identity(Index{1} << N, Index{1} << N));
}

}  // namespace

FerTerms classical_fer_terms(const BecModel& model, const Vec3& b) {
  model.validate();
  require_bias(model.omega, "classical_fer_terms");
  const SpinOps ops = collective_spin_operators(model.J);
  const double g = model.gamma;
  const double B = model.omega / g;
  const DenseMatrix jx = ops.x.to_dense(), jy = ops.y.to_dense(), jz = ops.z.to_dense();
  FerTerms f;
  f.omega = model.omega;
  f.HF0 = g * b.z() * jz;
  f.HF1 = g * (b.z() / B) * (b.x() * jx + b.y() * jy) + g * jz * (b.x() * b.x() + b.y() * b.y()) / (2.0 * B);
  f.Hbar = model.c2p * ops.sq.to_dense() + (b.z() / B) * g * b.y() * jy;
  return f;
}

FerTerms quantum_fer_terms(const QdModel& model) {
  if (model.N > kMaxDenseSites) throw ResourceError("quantum_fer_terms: N > 10 is too large for dense assembly");
  require_bias(model.omega, "quantum_fer_terms");
  const auto h = overhauser_operators(model);
  const auto s = central_spin_operators(model.N);
  const double w = model.omega;
  const DenseMatrix hx = DenseMatrix(h[0]), hy = DenseMatrix(h[1]), hz = DenseMatrix(h[2]);
  const DenseMatrix sx = DenseMatrix(s[0]), sy = DenseMatrix(s[1]), sz = DenseMatrix(s[2]);
  const DenseMatrix bath_term = kI * (hx * hy - hy * hx) / (4.0 * w);
  FerTerms f;
  f.omega = w;
  f.HF0 = hz * sz;
  f.HF1 = sx * (hz * hx + hx * hz) / (2.0 * w) + sy * (hz * hy + hy * hz) / (2.0 * w) +
          sz * (hx * hx + hy * hy) / (2.0 * w) + bath_term;
  f.Hbar = sy * (hz * hy + hy * hz) / (2.0 * w) + bath_term;
  return f;
}

DenseMatrix cycle_propagator_exact(const BecModel& model, const Sequence& cycle, const Vec3& b) {
  model.validate();
  const SpinOps ops = collective_spin_operators(model.J);
  if (ops.dim() > (Index{1} << 12)) throw ResourceError("cycle_propagator_exact: multiplet too large");
  return product(
      cycle, ops.dim(), [&](int sign) { return bec_hamiltonian(model, b, sign).to_dense(); },
      [&](const Rotation& r) { return rotation_operator(r, ops).to_dense(); });
}

DenseMatrix cycle_propagator_exact(const QdModel& model, const Sequence& cycle) {
  if (model.N > kMaxDenseSites) throw ResourceError("cycle_propagator_exact: N > 10 is too large");
  return product(
      cycle, model.dim(), [&](int sign) { return qd_hamiltonian(model, true, sign).to_dense(); },
      [&](const Rotation& r) { return central_pulse(r, model.N); });
}

double propagator_distance(const DenseMatrix& U, const DenseMatrix& V) {
  const Complex tr = (V.adjoint() * U).trace();
  const Complex phase = std::abs(tr) > 0.0 ? tr / std::abs(tr) : Complex(1.0);
  return spectral_norm(U - phase * V);
}

std::vector<SuppressionRow> suppression_factor(const BecModel& model, const Vec3& b, const std::vector<double>& omegas) {
  std::vector<SuppressionRow> rows;
  const SpinOps ops = collective_spin_operators(model.J);
  const DenseMatrix coupling = model.gamma * (b.x() * ops.x.to_dense() + b.y() * ops.y.to_dense() + b.z() * ops.z.to_dense());
  const double bare = spectral_norm(coupling);
  for (double w : omegas) {
    BecModel m = model;
    m.omega = w;
    const double tau = 2.0 * kPi / w;
    const FerTerms f = classical_fer_terms(m, b);
    const DenseMatrix u = cycle_propagator_exact(m, uni_dd(tau, 1), b);
    SuppressionRow r;
    r.omega = w;
    r.tau = tau;
    r.distance = propagator_distance(u, expm_hermitian(f.Hbar, 2.0 * tau));
    r.coupling_ratio = bare > 0.0 ? spectral_norm(f.Hbar - m.c2p * ops.sq.to_dense()) / bare : 0.0;
    rows.push_back(r);
  }
  return rows;
}

std::vector<SuppressionRow> suppression_factor(const QdModel& model, const std::vector<double>& omegas) {
  std::vector<SuppressionRow> rows;
  const auto h = overhauser_operators(model);
  const auto s = central_spin_operators(model.N);
  DenseMatrix hs = DenseMatrix::Zero(model.dim(), model.dim());
  for (int a = 0; a < 3; ++a) hs += DenseMatrix(s[a]) * DenseMatrix(h[a]);
  const double bare = spectral_norm(hs);
  for (double w : omegas) {
    QdModel m = model;
    m.omega = w;
    const double tau = 2.0 * kPi / w;
    const FerTerms f = quantum_fer_terms(m);
    const DenseMatrix u = cycle_propagator_exact(m, uni_dd(tau, 1));
    SuppressionRow r;
    r.omega = w;
    r.tau = tau;
    r.distance = propagator_distance(u, expm_hermitian(f.Hbar, 2.0 * tau));
    r.coupling_ratio = bare > 0.0 ? spectral_norm(f.Hbar) / bare : 0.0;
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> octave_ladder(double omega0, int count) {
  std::vector<double> w;
  for (int k = 0; k < count; ++k) w.push_back(omega0 * std::ldexp(1.0, k));
  return w;
}

}  // namespace ddsim
