#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddsim/models.hpp"
#include "ddsim/observables.hpp"
#include "ddsim/propagation.hpp"
#include "ddsim/sequences.hpp"

namespace ddsim {

inline constexpr int kConfigVersion = 1;
inline constexpr int kCsvVersion = 1;

// 2 pi n / tau
double magic_omega(double tau, int n = 1);

/// One protocol token, e.g. "uni", "uni:domega=-2", "uni_mod:eps=0.03",
/// "cudd:n=52", "hahn:tau_c=0.5". Parameters are ':'-separated key=value pairs.
struct ProtocolSpec {
  std::string token;
  std::string name;
  std::optional<double> tau;
  std::optional<double> domega;
  std::optional<double> omega;  // absolute bias, overrides the default
  std::optional<double> epsilon;
  std::optional<double> tau_c;
  std::optional<int> n;

  // Uni-family protocols and the Hahn echo run at the magic bias by default;
  // free evolution and the biaxial protocols run without a bias field.
  bool magic_bias() const;
};

ProtocolSpec parse_protocol(const std::string& token);
const std::vector<std::string>& protocol_names();

// Cycles of the protocol with pulse spacing tau, repeated to cover the horizon.
// CUDD/QDD cycles span Np tau (mean spacing tau).
Sequence build_sequence(const ProtocolSpec& p, double tau, double horizon);

// A single run with exactly `pulses` pulses over total time t; tau_out receives
// the pulse spacing used by equidistant protocols. Throws on a pulse-budget mismatch.
Sequence budget_sequence(const ProtocolSpec& p, int pulses, double t, double* tau_out = nullptr);

struct ExperimentConfig {
  int version = kConfigVersion;
  std::string experiment = "custom";
  std::string scale = "desk";
  std::string mode = "trajectories";  // trajectories | omega_scan | budget_scan
  std::string model = "bec";          // bec | qd | nv
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out;

  // BEC
  double J = 100.0;
  double c2p = -0.5;
  double gamma = 1.0;
  std::string initial = "css";  // css | sss
  double sss_xi2 = 0.02;
  std::string sss_method = "two_axis";
  std::string bec_engine = "rotation";  // rotation | dense

  // classical noise
  double b_c = 1.0;
  double tau_c = std::numeric_limits<double>::infinity();
  int realizations = 20;

  // quantum dot
  HyperfineGrid grid{};
  double gamma_max = 0.01;
  // NV center
  int nv_N = 10;
  // bath pure-state samples for qd / nv
  int bath_samples = 1;
  int max_sites = 16;

  // protocols
  double tau = 0.05;
  std::vector<std::string> protocols{"fe", "uni"};
  double horizon = 100.0;
  double fe_step = 0.01;
  double fe_horizon = 10.0;
  double stop_level = 0.0;  // register runs stop once the worst fidelity falls below
  int record_every = 1;

  // scans
  double scan_min = -15.0;
  double scan_max = 15.0;
  double scan_step = 0.5;
  int budget_pulses = 210;
  std::vector<double> budget_times{10, 20, 40, 80, 160};

  PropagatorConfig prop{};

  void validate() const;
  std::vector<std::pair<std::string, std::string>> entries() const;  // every key with its value
};

const std::vector<std::string>& preset_ids();
ExperimentConfig preset(const std::string& id);
std::string preset_description(const std::string& id);

// "key = value" lines, '#' comments. A leading "experiment = <id>" starts from that
// preset; later keys override it. Unknown keys and malformed values are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct PointResult {
  std::string id;
  ProtocolSpec protocol;
  double omega = 0.0;
  double tau = 0.0;
  double epsilon = 0.0;
  double tau_c = 0.0;
  bool budget = false;
  int realizations = 0;
  std::vector<double> times;
  std::vector<MetricSeries> metrics;
  std::vector<std::pair<std::string, CharacteristicTime>> characteristic;  // e.g. {"T0.9[fidelity]", ...}

  const MetricSeries& metric(const std::string& name) const;
  const CharacteristicTime& time(const std::string& key) const;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::pair<std::string, std::string>> notes;  // derived facts for the header
  std::vector<std::string> warnings;
  std::vector<PointResult> points;

  const PointResult& point(const std::string& protocol_token) const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_csv(std::ostream& out, const ExperimentResult& result);

// Effective-Hamiltonian checks (classical J = 20 and quantum N = 4); returns true if
// every distance is <= 0.05 and nonincreasing along the octave ladder.
bool run_verify(std::ostream& report, std::ostream* csv = nullptr);

}  // namespace ddsim
