#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ddsim/linalg.hpp"

namespace ddsim {

/// Collective spin of a ferromagnetic spin-1 condensate,
/// H = c2' J^2 + omega Jz + gamma b.J.
struct BecModel {
  double J = 100.0;
  double c2p = -0.5;
  double omega = 0.0;
  double gamma = 1.0;

  void validate() const;
};

// bias_sign = -1 reverses the bias field (omega -> -omega).
Operator bec_hamiltonian(const BecModel& model, const Vec3& b, int bias_sign = 1);

/// Nuclear lattice of a quantum dot. Sites sit on an nx-by-ny grid with spacing
/// (ax, ay), centered on the grid midpoint; site k = iy * nx + ix (row-major).
struct HyperfineGrid {
  int nx = 4;
  int ny = 3;
  double wx = 1.5;
  double wy = 2.0;
  double x0 = 0.1;
  double y0 = 0.2;
  double ax = 1.0;
  double ay = 1.0;
  double scale = 1.0;

  int sites() const { return nx * ny; }
};

std::vector<Eigen::Vector2d> grid_sites(const HyperfineGrid& grid);

// A_k = scale exp[-(x - x0)^2 / wx^2 - (y - y0)^2 / wy^2] at each site.
std::vector<double> hyperfine_couplings(int nx, int ny, double wx, double wy, double x0, double y0,
                                        const std::vector<Eigen::Vector2d>& sites, double scale);
std::vector<double> hyperfine_couplings(const HyperfineGrid& grid);

struct DipolarBond {
  int i = 0;
  int j = 0;
  double gamma = 0.0;
};

// 4-neighborhood pairs (i < j) of the row-major grid.
std::vector<std::array<int, 2>> nearest_neighbor_pairs(int nx, int ny);

// Gamma_ij uniform on [0, gamma_max] for every nearest-neighbor pair.
std::vector<DipolarBond> sample_dipolar_bonds(int nx, int ny, double gamma_max, std::uint64_t seed);

struct QdModel {
  int N = 0;
  std::vector<double> couplings;      // A_k, k = 1..N stored at index k-1
  std::vector<DipolarBond> dipolar;   // nuclear indices 0-based
  double omega = 0.0;
  int max_sites = 16;

  void validate() const;
  Index dim() const { return Index{1} << (N + 1); }
};

QdModel make_qd_model(const HyperfineGrid& grid, double gamma_max, double omega, std::uint64_t seed);

// omega S_z (if include_bias) + S.h + sum Gamma_ij (I_i.I_j - 3 I_iz I_jz).
Operator qd_hamiltonian(const QdModel& model, bool include_bias = true, int bias_sign = 1);

/// NV center spin coupled to N bath spins by secular dipolar bonds.
struct NvModel {
  int N = 0;
  std::vector<double> couplings;
  double omega = 0.0;
  int max_sites = 16;

  void validate() const;
  Index dim() const { return Index{1} << (N + 1); }
};

// A_k uniform on [0, 1].
NvModel make_nv_model(int N, double omega, std::uint64_t seed);

// sum_k A_k (S0.Sk - 3 S0z Skz), plus omega S0z if include_bias.
Operator nv_hamiltonian(const NvModel& model, bool include_bias = true, int bias_sign = 1);

// Overhauser field operators h_a = sum_k A_k I_ka on the full register.
std::array<SparseMatrix, 3> overhauser_operators(const QdModel& model);

// Central-spin operators S_x, S_y, S_z on the full register.
std::array<SparseMatrix, 3> central_spin_operators(int N);

}  // namespace ddsim
