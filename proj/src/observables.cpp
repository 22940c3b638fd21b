#include "ddsim/observables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddsim {

namespace {

SpinMoments moments_at(const Eigen::VectorXd& s, int k) {
  const int o = 9 * k;
  SpinMoments m;
  m.mean = s.segment<3>(o);
  m.second << s(o + 3), s(o + 4), s(o + 5), s(o + 4), s(o + 6), s(o + 7), s(o + 5), s(o + 7), s(o + 8);
  return m;
}

Eigen::Matrix2cd rho_at(const Eigen::VectorXd& s, int k) {
  const int o = 4 * k;
  Eigen::Matrix2cd rho;
  rho << s(o), Complex(s(o + 2), s(o + 3)), Complex(s(o + 2), -s(o + 3)), s(o + 1);
  return rho;
}

const std::array<Eigen::Matrix2cd, 4>& benchmark_rhos() {
  static const std::array<Eigen::Matrix2cd, 4> rhos = [] {
    std::array<Eigen::Matrix2cd, 4> r;
    for (int k = 0; k < 4; ++k) {
      const Vec3& n = benchmark_axes()[k];
      // (I + n.sigma) / 2
      r[k] << 0.5 * (1.0 + n.z()), Complex(0.5 * n.x(), -0.5 * n.y()), Complex(0.5 * n.x(), 0.5 * n.y()),
          0.5 * (1.0 - n.z());
    }
    return r;
  }();
  return rhos;
}

double overlap(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) { return (a * b).trace().real(); }

}  // namespace

double spin_average(const SpinMoments& m, double J) { return m.mean.norm() / J; }

double spin_average(const StateVector& psi, const SparseSpinOps& ops, double J) {
  return spin_average(spin_moments(psi, ops), J);
}

double squeezing(const SpinMoments& m, double J) {
  const Mat3 c = m.covariance();
  // clamp rounding below zero for eigenstates
  return 2.0 * std::max(0.0, c.diagonal().minCoeff()) / J;
}

double squeezing(const StateVector& psi, const SparseSpinOps& ops, double J) {
  return squeezing(spin_moments(psi, ops), J);
}

Eigen::Matrix2cd central_spin_state(const StateVector& psi_full, int N) {
  const Index dim = Index{1} << (N + 1);
  if (psi_full.dim() != dim) throw std::invalid_argument("central_spin_state: state does not match N");
  const Index h = dim / 2;
  const ComplexVector& v = psi_full.amplitudes();
  const auto up = v.head(h);
  const auto down = v.tail(h);
  Eigen::Matrix2cd rho;
  rho(0, 0) = up.squaredNorm();
  rho(1, 1) = down.squaredNorm();
  rho(0, 1) = down.dot(up);  // sum up_k conj(down_k)
  rho(1, 0) = std::conj(rho(0, 1));
  return rho;
}

double fidelity(const Eigen::Matrix2cd& rho_e0, const StateVector& psi_full, int N) {
  if (std::abs(rho_e0.trace() - Complex(1.0)) > 1e-10 || (rho_e0 - rho_e0.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("fidelity: rho_e0 is not a density matrix");
  return overlap(rho_e0, central_spin_state(psi_full, N));
}

std::vector<double> worst_case(const std::vector<std::vector<double>>& series, Aggregation agg) {
  if (series.empty()) throw std::invalid_argument("worst_case: no series");
  std::vector<double> out = series.front();
  for (const auto& s : series) {
    if (s.size() != out.size()) throw std::invalid_argument("worst_case: series lengths differ");
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = agg == Aggregation::min ? std::min(out[i], s[i]) : std::max(out[i], s[i]);
  }
  return out;
}

CharacteristicTime characteristic_time(const std::vector<double>& times, const std::vector<double>& values,
                                       double threshold, Crossing dir) {
  if (times.empty() || times.size() != values.size())
    throw std::invalid_argument("characteristic_time: empty or mismatched trajectory");
  CharacteristicTime ct;
  ct.threshold = threshold;
  ct.horizon = times.back();
  auto beyond = [&](double v) { return dir == Crossing::falling ? v < threshold : v > threshold; };
  if (beyond(values[0])) {
    ct.value = times[0];
    return ct;
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (beyond(values[i])) {
      const double f = (threshold - values[i - 1]) / (values[i] - values[i - 1]);
      ct.value = times[i - 1] + f * (times[i] - times[i - 1]);
      return ct;
    }
  }
  return ct;
}

std::vector<MetricSeries> bec_metrics(const Trajectory& averaged, double J) {
  MetricSeries avg{"spin_avg", {}, {}, Aggregation::min, Crossing::falling};
  MetricSeries xi{"xi2", {}, {}, Aggregation::max, Crossing::rising};
  MetricSeries perp{"xi2_perp", {}, {}, Aggregation::max, Crossing::rising};
  for (auto* m : {&avg, &xi, &perp}) m->per_state.assign(4, std::vector<double>(averaged.size()));
  for (std::size_t i = 0; i < averaged.size(); ++i) {
    if (averaged.samples[i].size() != kBecSampleWidth) throw std::invalid_argument("bec_metrics: not a BEC trajectory");
    for (int k = 0; k < 4; ++k) {
      const SpinMoments m = moments_at(averaged.samples[i], k);
      avg.per_state[k][i] = spin_average(m, J);
      xi.per_state[k][i] = squeezing(m, J);
      perp.per_state[k][i] = transverse_squeezing(m, J);
    }
  }
  for (auto* m : {&avg, &xi, &perp}) m->worst = worst_case(m->per_state, m->aggregation);
  return {avg, xi, perp};
}

double worst_fidelity(const Eigen::VectorXd& s) {
  double w = 1.0;
  for (int k = 0; k < 4; ++k) w = std::min(w, overlap(benchmark_rhos()[k], rho_at(s, k)));
  return w;
}

std::vector<MetricSeries> register_metrics(const Trajectory& averaged) {
  MetricSeries f{"fidelity", {}, {}, Aggregation::min, Crossing::falling};
  f.per_state.assign(4, std::vector<double>(averaged.size()));
  for (std::size_t i = 0; i < averaged.size(); ++i) {
    if (averaged.samples[i].size() != kRegisterSampleWidth)
      throw std::invalid_argument("register_metrics: not a register trajectory");
    for (int k = 0; k < 4; ++k) f.per_state[k][i] = overlap(benchmark_rhos()[k], rho_at(averaged.samples[i], k));
  }
  f.worst = worst_case(f.per_state, f.aggregation);
  return {f};
}

}  // namespace ddsim
