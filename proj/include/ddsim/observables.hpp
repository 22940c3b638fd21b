#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddsim/propagation.hpp"
#include "ddsim/spin_algebra.hpp"

namespace ddsim {

// j / J with j = |<J>|.
double spin_average(const StateVector& psi, const SparseSpinOps& ops, double J);
double spin_average(const SpinMoments& m, double J);

// 2 min{Var Jx, Var Jy, Var Jz} / J over the fixed laboratory axes.
double squeezing(const StateVector& psi, const SparseSpinOps& ops, double J);
double squeezing(const SpinMoments& m, double J);

// Reduced state of site 0 of an (N+1)-site register.
Eigen::Matrix2cd central_spin_state(const StateVector& psi_full, int N);

// Tr[rho_e(0) Tr_bath |psi><psi|]
double fidelity(const Eigen::Matrix2cd& rho_e0, const StateVector& psi_full, int N);

enum class Aggregation { min, max };

// Pointwise min (fidelity, spin average) or max (squeezing) across the series.
std::vector<double> worst_case(const std::vector<std::vector<double>>& series, Aggregation agg);

enum class Crossing { falling, rising };

struct CharacteristicTime {
  double threshold = 0.0;
  std::optional<double> value;  // empty: not reached within the horizon
  double horizon = 0.0;

  bool reached() const { return value.has_value(); }
  // value if reached, otherwise the horizon (a lower bound)
  double value_or_horizon() const { return value.value_or(horizon); }
};

// First crossing with linear interpolation between bracketing samples.
CharacteristicTime characteristic_time(const std::vector<double>& times, const std::vector<double>& values,
                                       double threshold, Crossing dir);

/// Metric series derived from an averaged raw trajectory.
struct MetricSeries {
  std::string name;                               // e.g. "spin_avg", "fidelity"
  std::vector<std::vector<double>> per_state;     // indexed by benchmark state
  std::vector<double> worst;
  Aggregation aggregation = Aggregation::min;
  Crossing crossing = Crossing::falling;
};

// spin_avg (min), xi2 (fixed axes, max) and xi2_perp (transverse, max).
std::vector<MetricSeries> bec_metrics(const Trajectory& averaged, double J);
// fidelity (min).
std::vector<MetricSeries> register_metrics(const Trajectory& averaged);

// Worst-case fidelity of one register sample.
double worst_fidelity(const Eigen::VectorXd& register_sample);

}  // namespace ddsim
