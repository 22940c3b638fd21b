#include "ddsim/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ddsim/rng.hpp"
#include "ddsim/spin_algebra.hpp"

namespace ddsim {

namespace {

// Couplings c_xy (S_i^x S_j^x + S_i^y S_j^y) + c_zz S_i^z S_j^z between register sites.
struct PairTerm {
  int i;
  int j;
  double c_xy;
  double c_zz;
};

void check_sites(int N, int max_sites, const char* who) {
  if (N < 1) throw std::invalid_argument(std::string(who) + ": need at least one bath spin");
  if (N > max_sites)
    throw ResourceError(std::string(who) + ": N = " + std::to_string(N) + " exceeds the configured maximum of " +
                        std::to_string(max_sites) + " bath spins");
}

SparseMatrix build_register_hamiltonian(int N, const std::vector<PairTerm>& pairs, double central_field) {
  const Index dim = Index{1} << (N + 1);
  auto bit = [N](Index state, int site) { return static_cast<int>((state >> (N - site)) & 1); };
  auto mask = [N](int site) { return Index{1} << (N - site); };

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(dim) * (1 + pairs.size()));
  for (Index s = 0; s < dim; ++s) {
    // bit 0 is spin up (S_z = +1/2)
    double diag = central_field * (bit(s, 0) == 0 ? 0.5 : -0.5);
    for (const PairTerm& p : pairs) {
      const int bi = bit(s, p.i);
      const int bj = bit(s, p.j);
      diag += p.c_zz * (bi == bj ? 0.25 : -0.25);
      if (bi != bj && p.c_xy != 0.0) {
        // (S+S- + S-S+)/2 flips an antiparallel pair with amplitude 1/2
        trip.emplace_back(s ^ (mask(p.i) | mask(p.j)), s, 0.5 * p.c_xy);
      }
    }
    if (diag != 0.0) trip.emplace_back(s, s, diag);
  }
  SparseMatrix h(dim, dim);
  h.setFromTriplets(trip.begin(), trip.end());
  h.makeCompressed();
  return h;
}

}  // namespace

void BecModel::validate() const {
  twice_spin(J);
  if (!std::isfinite(c2p) || !std::isfinite(omega) || !std::isfinite(gamma))
    throw std::invalid_argument("BecModel: non-finite parameter");
}

Operator bec_hamiltonian(const BecModel& model, const Vec3& b, int bias_sign) {
  model.validate();
  if (!b.allFinite()) throw std::invalid_argument("bec_hamiltonian: non-finite stray field");
  const SpinOps ops = collective_spin_operators(model.J);
  const double bias = bias_sign * model.omega;
  DenseMatrix h = model.c2p * ops.sq.to_dense() + (bias + model.gamma * b.z()) * ops.z.to_dense() +
                  model.gamma * b.x() * ops.x.to_dense() + model.gamma * b.y() * ops.y.to_dense();
  return Operator(std::move(h), true);
}

std::vector<Eigen::Vector2d> grid_sites(const HyperfineGrid& grid) {
  if (grid.nx < 1 || grid.ny < 1) throw std::invalid_argument("grid_sites: empty grid");
  const double cx = 0.5 * (grid.nx + 1);
  const double cy = 0.5 * (grid.ny + 1);
  std::vector<Eigen::Vector2d> sites;
  sites.reserve(static_cast<std::size_t>(grid.sites()));
  for (int iy = 1; iy <= grid.ny; ++iy)
    for (int ix = 1; ix <= grid.nx; ++ix) sites.emplace_back((ix - cx) * grid.ax, (iy - cy) * grid.ay);
  return sites;
}

std::vector<double> hyperfine_couplings(int nx, int ny, double wx, double wy, double x0, double y0,
                                        const std::vector<Eigen::Vector2d>& sites, double scale) {
  if (static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) != sites.size())
    throw std::invalid_argument("hyperfine_couplings: nx * ny does not match the site count");
  if (!(wx > 0.0) || !(wy > 0.0)) throw std::invalid_argument("hyperfine_couplings: widths must be positive");
  std::vector<double> a;
  a.reserve(sites.size());
  for (const auto& s : sites) {
    const double dx = s.x() - x0;
    const double dy = s.y() - y0;
    // infinite widths give the flat limit
    const double ex = std::isinf(wx) ? 0.0 : dx * dx / (wx * wx);
    const double ey = std::isinf(wy) ? 0.0 : dy * dy / (wy * wy);
    a.push_back(scale * std::exp(-ex - ey));
  }
  return a;
}

std::vector<double> hyperfine_couplings(const HyperfineGrid& grid) {
  return hyperfine_couplings(grid.nx, grid.ny, grid.wx * grid.ax, grid.wy * grid.ay, grid.x0 * grid.ax,
                             grid.y0 * grid.ay, grid_sites(grid), grid.scale);
}

std::vector<std::array<int, 2>> nearest_neighbor_pairs(int nx, int ny) {
  std::vector<std::array<int, 2>> pairs;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const int k = iy * nx + ix;
      if (ix + 1 < nx) pairs.push_back({k, k + 1});
      if (iy + 1 < ny) pairs.push_back({k, k + nx});
    }
  }
  return pairs;
}

std::vector<DipolarBond> sample_dipolar_bonds(int nx, int ny, double gamma_max, std::uint64_t seed) {
  if (!(gamma_max >= 0.0)) throw std::invalid_argument("sample_dipolar_bonds: gamma_max must be >= 0");
  CounterRng rng(seed, StreamDomain::dipolar, 0);
  std::vector<DipolarBond> bonds;
  for (const auto& p : nearest_neighbor_pairs(nx, ny)) bonds.push_back({p[0], p[1], rng.uniform(0.0, gamma_max)});
  return bonds;
}

void QdModel::validate() const {
  check_sites(N, max_sites, "QdModel");
  if (couplings.size() != static_cast<std::size_t>(N))
    throw std::invalid_argument("QdModel: expected " + std::to_string(N) + " hyperfine couplings");
  for (double a : couplings)
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("QdModel: hyperfine couplings must be positive");
  for (const auto& b : dipolar) {
    if (b.i < 0 || b.j < 0 || b.i >= N || b.j >= N || b.i == b.j)
      throw std::invalid_argument("QdModel: dipolar bond references an invalid site");
    if (!std::isfinite(b.gamma)) throw std::invalid_argument("QdModel: non-finite dipolar coupling");
  }
}

QdModel make_qd_model(const HyperfineGrid& grid, double gamma_max, double omega, std::uint64_t seed) {
  QdModel m;
  m.N = grid.sites();
  m.couplings = hyperfine_couplings(grid);
  m.dipolar = sample_dipolar_bonds(grid.nx, grid.ny, gamma_max, seed);
  m.omega = omega;
  m.max_sites = std::max(m.max_sites, 0);
  return m;
}

Operator qd_hamiltonian(const QdModel& model, bool include_bias, int bias_sign) {
  // Zero couplings are allowed here so limiting cases can be assembled; validate() is stricter.
  check_sites(model.N, model.max_sites, "qd_hamiltonian");
  if (model.couplings.size() != static_cast<std::size_t>(model.N))
    throw std::invalid_argument("qd_hamiltonian: coupling count does not match N");
  std::vector<PairTerm> pairs;
  for (int k = 0; k < model.N; ++k) pairs.push_back({0, k + 1, model.couplings[k], model.couplings[k]});
  for (const auto& b : model.dipolar) pairs.push_back({b.i + 1, b.j + 1, b.gamma, -2.0 * b.gamma});
  const double bias = include_bias ? bias_sign * model.omega : 0.0;
  return Operator(build_register_hamiltonian(model.N, pairs, bias), true);
}

void NvModel::validate() const {
  check_sites(N, max_sites, "NvModel");
  if (couplings.size() != static_cast<std::size_t>(N))
    throw std::invalid_argument("NvModel: expected " + std::to_string(N) + " couplings");
  for (double a : couplings)
    if (!std::isfinite(a)) throw std::invalid_argument("NvModel: non-finite coupling");
}

NvModel make_nv_model(int N, double omega, std::uint64_t seed) {
  NvModel m;
  m.N = N;
  m.omega = omega;
  CounterRng rng(seed, StreamDomain::nv_couplings, 0);
  for (int k = 0; k < N; ++k) m.couplings.push_back(rng.uniform());
  return m;
}

Operator nv_hamiltonian(const NvModel& model, bool include_bias, int bias_sign) {
  check_sites(model.N, model.max_sites, "nv_hamiltonian");
  if (model.couplings.size() != static_cast<std::size_t>(model.N))
    throw std::invalid_argument("nv_hamiltonian: coupling count does not match N");
  std::vector<PairTerm> pairs;
  for (int k = 0; k < model.N; ++k) pairs.push_back({0, k + 1, model.couplings[k], -2.0 * model.couplings[k]});
  const double bias = include_bias ? bias_sign * model.omega : 0.0;
  return Operator(build_register_hamiltonian(model.N, pairs, bias), true);
}

std::array<SparseMatrix, 3> overhauser_operators(const QdModel& model) {
  check_sites(model.N, model.max_sites, "overhauser_operators");
  const Eigen::Matrix2cd local[3] = {spin_half_x(), spin_half_y(), spin_half_z()};
  std::array<SparseMatrix, 3> h;
  for (int a = 0; a < 3; ++a) {
    h[a] = SparseMatrix(model.dim(), model.dim());
    for (int k = 0; k < model.N; ++k) h[a] += model.couplings[k] * single_site_operator(model.N, k + 1, local[a]).sparse();
    h[a].makeCompressed();
  }
  return h;
}

std::array<SparseMatrix, 3> central_spin_operators(int N) {
  return {single_site_operator(N, 0, spin_half_x()).sparse(), single_site_operator(N, 0, spin_half_y()).sparse(),
          single_site_operator(N, 0, spin_half_z()).sparse()};
}

}  // namespace ddsim
