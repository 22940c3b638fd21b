#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ddsim/chebyshev.hpp"
#include "ddsim/models.hpp"
#include "ddsim/noise.hpp"
#include "ddsim/sequences.hpp"
#include "ddsim/spin_algebra.hpp"

namespace ddsim {

enum class Engine { automatic, exact, chebyshev };

struct PropagatorConfig {
  Engine engine = Engine::automatic;
  double cheb_tol = 1e-12;
  double spectral_margin = 1.05;
  // automatic picks the exact engine when every symmetry block is at most this large
  Index max_exact_block = 2048;
  // memory for cached delay propagators of the exact engine
  std::size_t cache_bytes = std::size_t{512} << 20;

  void validate() const;
};

Engine parse_engine(const std::string& name);
std::string engine_name(Engine e);

// exp(-i H t) psi by dense eigendecomposition; dim <= 2^12.
StateVector evolve_exact(const Operator& H, const StateVector& psi, double t);
// exp(-i H t) psi by Chebyshev expansion; H must be sparse.
StateVector evolve_chebyshev(const Operator& H, const StateVector& psi, double t, const PropagatorConfig& cfg = {});

/// A central spin-1/2 (site 0) and N bath spins-1/2, with the Hamiltonian for
/// each bias sign.
struct SpinRegister {
  int N = 0;
  std::shared_ptr<const SparseMatrix> h_plus;
  std::shared_ptr<const SparseMatrix> h_minus;

  Index dim() const { return h_plus ? h_plus->rows() : 0; }
  const SparseMatrix& hamiltonian(int bias_sign) const { return bias_sign > 0 ? *h_plus : *h_minus; }
};

SpinRegister make_register(const QdModel& model, bool include_bias = true);
SpinRegister make_register(const NvModel& model, bool include_bias = true);

/// Delay propagation on a spin register. The exact engine diagonalizes each
/// connected block of the Hamiltonian's sparsity graph (the magnetization
/// sectors) once; the Chebyshev engine expands every distinct delay.
/// Not thread-safe: one instance per worker.
class RegisterPropagator {
 public:
  RegisterPropagator(const SpinRegister& reg, const PropagatorConfig& cfg);

  Engine engine() const { return engine_; }
  Index largest_block() const { return largest_block_; }

  // cols <- exp(-i H_sign t) cols
  void evolve(ComplexBlock& cols, double t, int bias_sign);
  // Rotation of the central spin only.
  static void pulse(ComplexBlock& cols, const Rotation& rot);

 private:
  struct Eigensystem {
    std::vector<DenseMatrix> vectors;
    std::vector<Eigen::VectorXd> values;
  };
  const Eigensystem& eigensystem(int bias_sign);
  void evolve_exact_blocks(ComplexBlock& cols, double t, int bias_sign);

  SpinRegister reg_;
  PropagatorConfig cfg_;
  Engine engine_;
  std::vector<std::vector<Index>> blocks_;
  std::vector<Index> order_;    // basis indices listed block by block
  std::vector<Index> offsets_;  // first row of each block in that order
  Index largest_block_ = 0;
  std::map<int, Eigensystem> eig_;
  std::map<std::pair<int, double>, std::vector<DenseMatrix>> unitary_cache_;
  std::size_t cached_bytes_ = 0;
  std::map<std::pair<int, double>, std::unique_ptr<ChebyshevExpm>> cheb_cache_;
};

// Called at t = 0 and at every mark; returning false stops the run early.
using BlockHook = std::function<bool(double t, const ComplexBlock& cols)>;
using StateHook = std::function<void(double t, const StateVector& psi)>;

// Runs seq on the columns; returns the time reached. Column norms are checked at
// every mark (NormDriftError beyond 1e-10).
double run_sequence(RegisterPropagator& prop, const Sequence& seq, ComplexBlock& cols, const BlockHook& hook);

StateVector run_sequence(const SpinRegister& reg, const Sequence& seq, const StateVector& psi0,
                         const PropagatorConfig& cfg, const StateHook& hook = {});

// Collective spin under classical noise by dense eigendecomposition of the
// (2J+1)-dim Hamiltonian, reused while the field and bias sign stay fixed.
StateVector run_sequence(const BecModel& model, const Sequence& seq, const StateVector& psi0,
                         const NoiseRealization& noise, const StateHook& hook = {});

// The BEC Hamiltonian is linear in J on the maximal multiplet (J^2 is a constant
// there), so every delay and pulse is a rotation. Returns the SO(3) matrix of the
// whole sequence; hook receives the accumulated matrix at t = 0 and every mark.
using RotationHook = std::function<void(double t, const Mat3& R)>;
Mat3 run_rotations(const BecModel& model, const Sequence& seq, const NoiseRealization& noise,
                   const RotationHook& hook = {});

/// Raw linear data recorded at marks: averaging acts on these, metrics are
/// derived afterwards.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> samples;
  std::string label;
  std::uint64_t realization = 0;

  std::size_t size() const { return times.size(); }
  void truncate(std::size_t n);
};

// Pointwise mean in index order. Throws on mismatched time grids.
Trajectory average_trajectories(const std::vector<Trajectory>& trajs);

// Benchmark initial directions x, y, z, -z.
const std::array<Vec3, 4>& benchmark_axes();

// Per benchmark state: <J> (3) then Re<J_a J_b> for ab = xx xy xz yy yz zz (6).
inline constexpr int kBecSampleWidth = 36;
// Per benchmark state: rho_00, rho_11, Re rho_01, Im rho_01 of the central spin.
inline constexpr int kRegisterSampleWidth = 16;

// `reference` holds the moments of the initial state prepared with mean along +z;
// benchmark state k is that state rotated onto benchmark_axes()[k].
Trajectory bec_benchmark(const BecModel& model, const Sequence& seq, const NoiseRealization& noise,
                         const SpinMoments& reference);

// Same data from state vectors (dense engine); the oracle for bec_benchmark.
Trajectory bec_benchmark_dense(const BecModel& model, const Sequence& seq, const NoiseRealization& noise,
                               const StateVector& reference);

// Random pure bath state: complex Gaussian amplitudes from (seed, index).
ComplexVector random_bath_state(int N, std::uint64_t seed, std::uint64_t index);

// Evolves |up> x bath and |down> x bath together and records the reduced central
// spin state of all four benchmark states. stop(t, sample) may end the run early.
using SampleStop = std::function<bool(double t, const Eigen::VectorXd& sample)>;
Trajectory register_benchmark(RegisterPropagator& prop, const Sequence& seq, const ComplexVector& bath,
                              const SampleStop& stop = {});

// Reduced central-spin data for the two evolved columns.
Eigen::VectorXd register_sample(const ComplexBlock& cols);

}  // namespace ddsim
