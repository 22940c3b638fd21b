#include "ddsim/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "ddsim/rng.hpp"

namespace ddsim {

namespace {

constexpr double kNormDrift = 1e-10;
constexpr Index kMaxExactDim = Index{1} << 12;

void check_norms(const ComplexBlock& cols, const Eigen::VectorXd& initial, double t) {
  for (Index c = 0; c < cols.cols(); ++c) {
    const double drift = std::abs(cols.col(c).norm() - initial(c));
    if (drift > kNormDrift * std::max(1.0, initial(c)))
      throw NormDriftError("state norm drifted by " + std::to_string(drift) + " at t = " + std::to_string(t));
  }
}

Eigen::VectorXd column_norms(const ComplexBlock& cols) {
  Eigen::VectorXd n(cols.cols());
  for (Index c = 0; c < cols.cols(); ++c) n(c) = cols.col(c).norm();
  return n;
}

// Connected components of the sparsity graph, each sorted ascending.
std::vector<std::vector<Index>> connected_blocks(const SparseMatrix& h) {
  const Index n = h.rows();
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (Index r = 0; r < n; ++r) {
    for (SparseMatrix::InnerIterator it(h, r); it; ++it) {
      if (it.value() == Complex(0.0)) continue;
      const Index a = find(r), b = find(it.col());
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<Index> slot(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Index>> blocks;
  for (Index i = 0; i < n; ++i) {
    const Index root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<Index>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[root]].push_back(i);
  }
  return blocks;
}

// rows <- u rows, one matrix-vector product per column (faster than Eigen's
// GEMM path for the two-column blocks used here).
template <class Rows>
void apply_columns(const DenseMatrix& u, Rows&& rows) {
  ComplexVector tmp(rows.rows());
  for (Index c = 0; c < rows.cols(); ++c) {
    tmp.noalias() = u * rows.col(c);
    rows.col(c) = tmp;
  }
}

// Per-mark driver shared by the register runs.
template <class Delay, class Pulse, class Mark>
double drive(const Sequence& seq, Delay&& delay, Pulse&& pulse, Mark&& mark) {
  double t = 0.0;
  std::size_t m = 0;
  while (m < seq.marks.size() && seq.marks[m] == 0) ++m;
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const SequenceEvent& e = seq.events[i];
    if (e.is_delay()) {
      delay(t, e.duration, e.bias_sign);
      t += e.duration;
    } else {
      pulse(e.rotation);
    }
    bool go = true;
    while (m < seq.marks.size() && seq.marks[m] == i + 1) {
      go = mark(t) && go;
      ++m;
    }
    if (!go) break;
  }
  return t;
}

SpinRegister register_from(Operator plus, Operator minus, int N) {
  SpinRegister r;
  r.N = N;
  r.h_plus = std::make_shared<const SparseMatrix>(plus.to_sparse());
  r.h_minus = std::make_shared<const SparseMatrix>(minus.to_sparse());
  return r;
}

}  // namespace

void PropagatorConfig::validate() const {
  if (!(cheb_tol > 0.0 && cheb_tol <= 1e-6)) throw std::invalid_argument("propagator: cheb_tol must lie in (0, 1e-6]");
  if (!(spectral_margin >= 1.0)) throw std::invalid_argument("propagator: spectral_margin must be >= 1");
  if (max_exact_block < 1) throw std::invalid_argument("propagator: max_exact_block must be positive");
}

Engine parse_engine(const std::string& name) {
  if (name == "auto") return Engine::automatic;
  if (name == "exact") return Engine::exact;
  if (name == "chebyshev") return Engine::chebyshev;
  throw std::invalid_argument("unknown engine '" + name + "' (auto, exact, chebyshev)");
}

std::string engine_name(Engine e) {
  switch (e) {
    case Engine::automatic: return "auto";
    case Engine::exact: return "exact";
    case Engine::chebyshev: return "chebyshev";
  }
  return "?";
}

StateVector evolve_exact(const Operator& H, const StateVector& psi, double t) {
  if (H.dim() != psi.dim()) throw std::invalid_argument("evolve_exact: dimension mismatch");
  if (H.dim() > kMaxExactDim) throw ResourceError("evolve_exact: dimension " + std::to_string(H.dim()) + " exceeds 4096");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(H.to_dense());
  if (es.info() != Eigen::Success) throw ConvergenceError("evolve_exact: eigendecomposition failed");
  const ComplexVector phases = (es.eigenvalues().cast<Complex>() * Complex(0.0, -t)).array().exp();
  ComplexVector out = es.eigenvectors() * (phases.asDiagonal() * (es.eigenvectors().adjoint() * psi.amplitudes()));
  if (std::abs(out.norm() - 1.0) > kNormDrift) throw NormDriftError("evolve_exact: norm drift");
  return StateVector::normalized(std::move(out));
}

StateVector evolve_chebyshev(const Operator& H, const StateVector& psi, double t, const PropagatorConfig& cfg) {
  cfg.validate();
  if (H.dim() != psi.dim()) throw std::invalid_argument("evolve_chebyshev: dimension mismatch");
  auto h = std::make_shared<const SparseMatrix>(H.to_sparse());
  ChebyshevExpm prop(h, t, cfg.cheb_tol, cfg.spectral_margin);
  ComplexBlock block = psi.amplitudes();
  prop.apply(block);
  if (std::abs(block.norm() - 1.0) > kNormDrift) throw NormDriftError("evolve_chebyshev: norm drift");
  return StateVector::normalized(block.col(0));
}

SpinRegister make_register(const QdModel& model, bool include_bias) {
  return register_from(qd_hamiltonian(model, include_bias, 1), qd_hamiltonian(model, include_bias, -1), model.N);
}

SpinRegister make_register(const NvModel& model, bool include_bias) {
  return register_from(nv_hamiltonian(model, include_bias, 1), nv_hamiltonian(model, include_bias, -1), model.N);
}

RegisterPropagator::RegisterPropagator(const SpinRegister& reg, const PropagatorConfig& cfg)
    : reg_(reg), cfg_(cfg), engine_(cfg.engine) {
  cfg_.validate();
  if (!reg_.h_plus || !reg_.h_minus) throw std::invalid_argument("RegisterPropagator: empty register");
  if (engine_ != Engine::chebyshev) {
    // the +/- Hamiltonians differ only on the diagonal, so one block structure serves both
    blocks_ = connected_blocks(*reg_.h_plus);
    for (const auto& b : blocks_) {
      largest_block_ = std::max<Index>(largest_block_, static_cast<Index>(b.size()));
      offsets_.push_back(static_cast<Index>(order_.size()));
      order_.insert(order_.end(), b.begin(), b.end());
    }
    if (engine_ == Engine::automatic)
      engine_ = largest_block_ <= cfg_.max_exact_block ? Engine::exact : Engine::chebyshev;
  }
}

const RegisterPropagator::Eigensystem& RegisterPropagator::eigensystem(int bias_sign) {
  auto it = eig_.find(bias_sign);
  if (it != eig_.end()) return it->second;
  const SparseMatrix& h = reg_.hamiltonian(bias_sign);
  Eigensystem sys;
  for (const auto& idx : blocks_) {
    const auto n = static_cast<Index>(idx.size());
    DenseMatrix sub(n, n);
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b) sub(a, b) = h.coeff(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sub);
    if (es.info() != Eigen::Success) throw ConvergenceError("RegisterPropagator: block eigendecomposition failed");
    sys.vectors.push_back(es.eigenvectors());
    sys.values.push_back(es.eigenvalues());
  }
  return eig_.emplace(bias_sign, std::move(sys)).first->second;
}

void RegisterPropagator::evolve_exact_blocks(ComplexBlock& cols, double t, int bias_sign) {
  // work in block order so every block is a contiguous row range
  ComplexBlock work = cols(order_, Eigen::all);
  const auto key = std::make_pair(bias_sign, t);
  if (auto it = unitary_cache_.find(key); it != unitary_cache_.end()) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      auto rows = work.middleRows(offsets_[b], static_cast<Index>(blocks_[b].size()));
      apply_columns(it->second[b], rows);
    }
  } else {
    const Eigensystem& sys = eigensystem(bias_sign);
    std::size_t bytes = 0;
    for (const auto& v : sys.vectors) bytes += static_cast<std::size_t>(v.size()) * sizeof(Complex);
    const bool keep = cached_bytes_ + bytes <= cfg_.cache_bytes;
    std::vector<DenseMatrix> unitaries;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const DenseMatrix& v = sys.vectors[b];
      const ComplexVector phases = (sys.values[b].cast<Complex>() * Complex(0.0, -t)).array().exp();
      auto rows = work.middleRows(offsets_[b], static_cast<Index>(blocks_[b].size()));
      if (keep) {
        unitaries.push_back(v * phases.asDiagonal() * v.adjoint());
        apply_columns(unitaries.back(), rows);
      } else {
        ComplexVector tmp(v.rows());
        for (Index c = 0; c < rows.cols(); ++c) {
          tmp.noalias() = v.adjoint() * rows.col(c);
          rows.col(c).noalias() = v * phases.cwiseProduct(tmp);
        }
      }
    }
    if (keep) {
      cached_bytes_ += bytes;
      unitary_cache_.emplace(key, std::move(unitaries));
    }
  }
  cols(order_, Eigen::all) = work;
}

void RegisterPropagator::evolve(ComplexBlock& cols, double t, int bias_sign) {
  if (cols.rows() != reg_.dim()) throw std::invalid_argument("RegisterPropagator: dimension mismatch");
  if (t == 0.0) return;
  if (engine_ == Engine::exact) {
    evolve_exact_blocks(cols, t, bias_sign);
    return;
  }
  const auto key = std::make_pair(bias_sign, t);
  auto it = cheb_cache_.find(key);
  if (it == cheb_cache_.end()) {
    auto h = bias_sign > 0 ? reg_.h_plus : reg_.h_minus;
    it = cheb_cache_.emplace(key, std::make_unique<ChebyshevExpm>(h, t, cfg_.cheb_tol, cfg_.spectral_margin)).first;
  }
  it->second->apply(cols);
}

void RegisterPropagator::pulse(ComplexBlock& cols, const Rotation& rot) {
  const Eigen::Matrix2cd u = spin_half_rotation(rot);
  const Index h = cols.rows() / 2;
  const ComplexBlock up = cols.topRows(h);
  const ComplexBlock down = cols.bottomRows(h);
  cols.topRows(h) = u(0, 0) * up + u(0, 1) * down;
  cols.bottomRows(h) = u(1, 0) * up + u(1, 1) * down;
}

double run_sequence(RegisterPropagator& prop, const Sequence& seq, ComplexBlock& cols, const BlockHook& hook) {
  seq.validate();
  const Eigen::VectorXd norms = column_norms(cols);
  if (hook && !hook(0.0, cols)) return 0.0;
  return drive(
      seq, [&](double, double d, int sign) { prop.evolve(cols, d, sign); },
      [&](const Rotation& r) { RegisterPropagator::pulse(cols, r); },
      [&](double t) {
        check_norms(cols, norms, t);
        return hook ? hook(t, cols) : true;
      });
}

StateVector run_sequence(const SpinRegister& reg, const Sequence& seq, const StateVector& psi0,
                         const PropagatorConfig& cfg, const StateHook& hook) {
  RegisterPropagator prop(reg, cfg);
  ComplexBlock cols = psi0.amplitudes();
  BlockHook bh;
  if (hook) bh = [&](double t, const ComplexBlock& c) {
    hook(t, StateVector::normalized(c.col(0)));
    return true;
  };
  run_sequence(prop, seq, cols, bh);
  check_norms(cols, Eigen::VectorXd::Ones(1), seq.total_time());
  return StateVector::normalized(cols.col(0));
}

StateVector run_sequence(const BecModel& model, const Sequence& seq, const StateVector& psi0,
                         const NoiseRealization& noise, const StateHook& hook) {
  model.validate();
  seq.validate();
  const SpinOps ops = collective_spin_operators(model.J);
  if (psi0.dim() != ops.dim()) throw std::invalid_argument("run_sequence: state is not on the BEC multiplet");
  if (noise.horizon() + 1e-9 * std::max(1.0, seq.total_time()) < seq.total_time())
    throw std::invalid_argument("run_sequence: noise realization is shorter than the sequence");

  ComplexVector psi = psi0.amplitudes();
  // eigensystem of the most recent (field, sign)
  Vec3 last_b = Vec3::Constant(std::nan(""));
  int last_sign = 0;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es;
  std::vector<std::pair<Rotation, DenseMatrix>> pulses;

  auto emit = [&](double t) {
    if (std::abs(psi.norm() - 1.0) > kNormDrift) throw NormDriftError("run_sequence: norm drift");
    if (hook) hook(t, StateVector::normalized(psi));
  };
  emit(0.0);
  drive(
      seq,
      [&](double t0, double d, int sign) {
        for (const NoisePiece& p : noise.pieces(t0, d)) {
          if (sign != last_sign || p.b != last_b) {
            es.compute(bec_hamiltonian(model, p.b, sign).to_dense());
            if (es.info() != Eigen::Success) throw ConvergenceError("run_sequence: eigendecomposition failed");
            last_b = p.b;
            last_sign = sign;
          }
          const ComplexVector phases = (es.eigenvalues().cast<Complex>() * Complex(0.0, -p.duration)).array().exp();
          psi = es.eigenvectors() * (phases.asDiagonal() * (es.eigenvectors().adjoint() * psi));
        }
      },
      [&](const Rotation& r) {
        auto it = std::find_if(pulses.begin(), pulses.end(), [&](const auto& e) {
          return e.first.axis() == r.axis() && e.first.angle() == r.angle();
        });
        if (it == pulses.end()) {
          pulses.emplace_back(r, rotation_operator(r, ops).to_dense());
          it = std::prev(pulses.end());
        }
        psi = it->second * psi;
      },
      [&](double t) {
        emit(t);
        return true;
      });
  return StateVector::normalized(psi);
}

Mat3 run_rotations(const BecModel& model, const Sequence& seq, const NoiseRealization& noise, const RotationHook& hook) {
  model.validate();
  seq.validate();
  Mat3 R = Mat3::Identity();
  if (hook) hook(0.0, R);
  drive(
      seq,
      [&](double t0, double d, int sign) {
        for (const NoisePiece& p : noise.pieces(t0, d)) {
          Vec3 n = model.gamma * p.b;
          n.z() += sign * model.omega;
          const double rate = n.norm();
          if (rate > 0.0) R = so3_matrix(Rotation(n / rate, rate * p.duration)) * R;
        }
      },
      [&](const Rotation& r) { R = so3_matrix(r) * R; },
      [&](double t) {
        if (hook) hook(t, R);
        return true;
      });
  return R;
}

void Trajectory::truncate(std::size_t n) {
  if (n < times.size()) {
    times.resize(n);
    samples.resize(n);
  }
}

Trajectory average_trajectories(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw std::invalid_argument("average_trajectories: no trajectories");
  std::vector<const Trajectory*> order;
  for (const auto& t : trajs) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(),
                   [](const Trajectory* a, const Trajectory* b) { return a->realization < b->realization; });
  const Trajectory& first = *order.front();
  Trajectory out;
  out.times = first.times;
  out.label = first.label;
  out.samples.assign(first.size(), Eigen::VectorXd());
  for (std::size_t i = 0; i < first.size(); ++i) out.samples[i] = Eigen::VectorXd::Zero(first.samples[i].size());
  for (const Trajectory* t : order) {
    if (t->times.size() != first.times.size()) throw std::invalid_argument("average_trajectories: time grids differ");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (std::abs(t->times[i] - first.times[i]) > 1e-12 * std::max(1.0, std::abs(first.times[i])) ||
          t->samples[i].size() != out.samples[i].size())
        throw std::invalid_argument("average_trajectories: time grids differ");
      out.samples[i] += t->samples[i];
    }
  }
  for (auto& s : out.samples) s /= static_cast<double>(order.size());
  return out;
}

const std::array<Vec3, 4>& benchmark_axes() {
  static const std::array<Vec3, 4> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitZ()};
  return axes;
}

namespace {

void put_moments(Eigen::VectorXd& s, int k, const SpinMoments& m) {
  const int o = 9 * k;
  s.segment<3>(o) = m.mean;
  s(o + 3) = m.second(0, 0);
  s(o + 4) = m.second(0, 1);
  s(o + 5) = m.second(0, 2);
  s(o + 6) = m.second(1, 1);
  s(o + 7) = m.second(1, 2);
  s(o + 8) = m.second(2, 2);
}

}  // namespace

Trajectory bec_benchmark(const BecModel& model, const Sequence& seq, const NoiseRealization& noise,
                         const SpinMoments& reference) {
  std::array<SpinMoments, 4> start;
  for (int k = 0; k < 4; ++k) start[k] = reference.rotated(so3_matrix(rotation_between(Vec3::UnitZ(), benchmark_axes()[k])));
  Trajectory traj;
  traj.label = seq.label;
  traj.realization = noise.index;
  run_rotations(model, seq, noise, [&](double t, const Mat3& R) {
    Eigen::VectorXd s(kBecSampleWidth);
    for (int k = 0; k < 4; ++k) put_moments(s, k, start[k].rotated(R));
    traj.times.push_back(t);
    traj.samples.push_back(std::move(s));
  });
  return traj;
}

Trajectory bec_benchmark_dense(const BecModel& model, const Sequence& seq, const NoiseRealization& noise,
                               const StateVector& reference) {
  const SparseSpinOps ops = sparse_spin_operators(model.J);
  Trajectory traj;
  traj.label = seq.label;
  traj.realization = noise.index;
  for (int k = 0; k < 4; ++k) {
    const StateVector psi0 = rotate_state(reference, rotation_between(Vec3::UnitZ(), benchmark_axes()[k]), ops);
    std::size_t i = 0;
    run_sequence(model, seq, psi0, noise, [&](double t, const StateVector& psi) {
      if (k == 0) {
        traj.times.push_back(t);
        traj.samples.emplace_back(kBecSampleWidth);
      }
      put_moments(traj.samples[i++], k, spin_moments(psi, ops));
    });
  }
  return traj;
}

ComplexVector random_bath_state(int N, std::uint64_t seed, std::uint64_t index) {
  if (N < 1 || N > 30) throw ResourceError("random_bath_state: bad bath size");
  CounterRng rng(seed, StreamDomain::bath_state, index);
  ComplexVector v(Index{1} << N);
  for (Index i = 0; i < v.size(); ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    v(i) = Complex(re, im);
  }
  return v / v.norm();
}

Eigen::VectorXd register_sample(const ComplexBlock& cols) {
  const Index h = cols.rows() / 2;
  ComplexBlock w(h, 4);
  w << cols.col(0).head(h), cols.col(0).tail(h), cols.col(1).head(h), cols.col(1).tail(h);
  // g(p, q) = <w_q | w_p>, p = 2 i + a for column i and central-spin state a
  const DenseMatrix g = (w.adjoint() * w).transpose();
  const double r = std::sqrt(0.5);
  const std::array<Eigen::Vector2cd, 4> coeff{Eigen::Vector2cd(r, r), Eigen::Vector2cd(r, Complex(0.0, r)),
                                             Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(0.0, 1.0)};
  Eigen::VectorXd s(kRegisterSampleWidth);
  for (int k = 0; k < 4; ++k) {
    Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) rho(a, b) += coeff[k](i) * std::conj(coeff[k](j)) * g(2 * i + a, 2 * j + b);
    s(4 * k) = rho(0, 0).real();
    s(4 * k + 1) = rho(1, 1).real();
    s(4 * k + 2) = rho(0, 1).real();
    s(4 * k + 3) = rho(0, 1).imag();
  }
  return s;
}

Trajectory register_benchmark(RegisterPropagator& prop, const Sequence& seq, const ComplexVector& bath,
                              const SampleStop& stop) {
  const Index half = bath.size();
  ComplexBlock cols = ComplexBlock::Zero(2 * half, 2);
  cols.col(0).head(half) = bath;
  cols.col(1).tail(half) = bath;
  Trajectory traj;
  traj.label = seq.label;
  run_sequence(prop, seq, cols, [&](double t, const ComplexBlock& c) {
    traj.times.push_back(t);
    traj.samples.push_back(register_sample(c));
    return !(stop && stop(t, traj.samples.back()));
  });
  return traj;
}

}  // namespace ddsim
