#include "ddsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ddsim/avg_hamiltonian.hpp"
#include "ddsim/noise.hpp"
#include "ddsim/rng.hpp"

namespace ddsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v, const char* spec = "%.10g") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string exact(double v) { return fmt(v, "%.17g"); }

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isnan(d))
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return d;
}

long long to_integer(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  char* end = nullptr;
  const long long i = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + v + "'");
  return i;
}

std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  const std::string s = trim(v);
  std::string list;
  for (const char* a : allowed) {
    if (s == a) return s;
    list += std::string(list.empty() ? "" : ", ") + a;
  }
  throw std::invalid_argument("config: '" + key + "' must be one of " + list + ", got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define DD_DOUBLE(KEY, MEMBER)                                                               \
  Field {                                                                                    \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); },    \
        [](const ExperimentConfig& c) { return exact(c.MEMBER); }                            \
  }
#define DD_INT(KEY, MEMBER)                                                                                   \
  Field {                                                                                                     \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = static_cast<int>(to_integer(KEY, v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      DD_INT("version", version),
      {"experiment", [](ExperimentConfig& c, const std::string& v) { c.experiment = trim(v); },
       [](const ExperimentConfig& c) { return c.experiment; }},
      {"scale", [](ExperimentConfig& c, const std::string& v) { c.scale = one_of("scale", v, {"desk", "paper"}); },
       [](const ExperimentConfig& c) { return c.scale; }},
      {"mode",
       [](ExperimentConfig& c, const std::string& v) {
         c.mode = one_of("mode", v, {"trajectories", "omega_scan", "budget_scan"});
       },
       [](const ExperimentConfig& c) { return c.mode; }},
      {"model", [](ExperimentConfig& c, const std::string& v) { c.model = one_of("model", v, {"bec", "qd", "nv"}); },
       [](const ExperimentConfig& c) { return c.model; }},
      {"seed",
       [](ExperimentConfig& c, const std::string& v) {
         const std::string s = trim(v);
         char* end = nullptr;
         const unsigned long long x = std::strtoull(s.c_str(), &end, 10);
         if (s.empty() || s[0] == '-' || end != s.c_str() + s.size())
           throw std::invalid_argument("config: 'seed' expects a non-negative integer, got '" + v + "'");
         c.seed = x;
       },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      DD_INT("workers", workers),
      {"out", [](ExperimentConfig& c, const std::string& v) { c.out = trim(v); },
       [](const ExperimentConfig& c) { return c.out; }},
      DD_DOUBLE("bec.J", J),
      DD_DOUBLE("bec.c2p", c2p),
      DD_DOUBLE("bec.gamma", gamma),
      {"bec.engine",
       [](ExperimentConfig& c, const std::string& v) { c.bec_engine = one_of("bec.engine", v, {"rotation", "dense"}); },
       [](const ExperimentConfig& c) { return c.bec_engine; }},
      {"initial", [](ExperimentConfig& c, const std::string& v) { c.initial = one_of("initial", v, {"css", "sss"}); },
       [](const ExperimentConfig& c) { return c.initial; }},
      DD_DOUBLE("sss.xi2", sss_xi2),
      {"sss.method",
       [](ExperimentConfig& c, const std::string& v) {
         c.sss_method = one_of("sss.method", v, {"one_axis", "two_axis"});
       },
       [](const ExperimentConfig& c) { return c.sss_method; }},
      DD_DOUBLE("noise.b_c", b_c),
      DD_DOUBLE("noise.tau_c", tau_c),
      DD_INT("noise.realizations", realizations),
      DD_INT("qd.nx", grid.nx),
      DD_INT("qd.ny", grid.ny),
      DD_DOUBLE("qd.wx", grid.wx),
      DD_DOUBLE("qd.wy", grid.wy),
      DD_DOUBLE("qd.x0", grid.x0),
      DD_DOUBLE("qd.y0", grid.y0),
      DD_DOUBLE("qd.ax", grid.ax),
      DD_DOUBLE("qd.ay", grid.ay),
      DD_DOUBLE("qd.scale", grid.scale),
      DD_DOUBLE("qd.gamma_max", gamma_max),
      DD_INT("nv.N", nv_N),
      DD_INT("bath.samples", bath_samples),
      DD_INT("max_sites", max_sites),
      DD_DOUBLE("tau", tau),
      {"protocols",
       [](ExperimentConfig& c, const std::string& v) {
         c.protocols = split_ws(v);
         for (const auto& t : c.protocols) parse_protocol(t);
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (const auto& p : c.protocols) s += (s.empty() ? "" : " ") + p;
         return s;
       }},
      DD_DOUBLE("horizon", horizon),
      DD_DOUBLE("fe.step", fe_step),
      DD_DOUBLE("fe.horizon", fe_horizon),
      DD_DOUBLE("stop_level", stop_level),
      DD_INT("record_every", record_every),
      DD_DOUBLE("scan.min", scan_min),
      DD_DOUBLE("scan.max", scan_max),
      DD_DOUBLE("scan.step", scan_step),
      DD_INT("budget.pulses", budget_pulses),
      {"budget.times",
       [](ExperimentConfig& c, const std::string& v) {
         c.budget_times.clear();
         for (const auto& w : split_ws(v)) c.budget_times.push_back(to_double("budget.times", w));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (double t : c.budget_times) s += (s.empty() ? "" : " ") + exact(t);
         return s;
       }},
      {"engine", [](ExperimentConfig& c, const std::string& v) { c.prop.engine = parse_engine(trim(v)); },
       [](const ExperimentConfig& c) { return engine_name(c.prop.engine); }},
      DD_DOUBLE("cheb_tol", prop.cheb_tol),
      DD_DOUBLE("spectral_margin", prop.spectral_margin),
      {"max_exact_block",
       [](ExperimentConfig& c, const std::string& v) { c.prop.max_exact_block = to_integer("max_exact_block", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.prop.max_exact_block); }},
  };
  return f;
}

#undef DD_DOUBLE
#undef DD_INT

int uni_family_cycle_pulses(const std::string& name) {
  if (name == "uni" || name == "uni_mod" || name == "suni") return 2;
  if (name == "cuni2") return 10;
  if (name == "pdd") return 4;
  if (name == "sdd") return 6;
  if (name == "cdd2") return 20;
  return 0;
}

// delay time per cycle in units of tau
int cycle_taus(const std::string& name) {
  if (name == "uni" || name == "uni_mod") return 2;
  if (name == "suni" || name == "pdd") return 4;
  if (name == "sdd") return 8;
  if (name == "cuni2" || name == "cdd2") return 16;
  return 0;
}

Sequence one_cycle(const ProtocolSpec& p, double tau) {
  const double eps = p.epsilon.value_or(0.0);
  if (p.name == "uni") return uni_dd(tau, 1, eps, false);
  if (p.name == "uni_mod") return uni_dd(tau, 1, eps, true);
  if (p.name == "suni") return suni_dd(tau, 1);
  if (p.name == "cuni2") return concat_uni(tau, 2, 1);
  if (p.name == "pdd") return pdd(tau, 1);
  if (p.name == "sdd") return sdd(tau, 1);
  if (p.name == "cdd2") return cdd2(tau, 1);
  throw std::invalid_argument("protocol '" + p.name + "' has no fixed cycle");
}

}  // namespace

double magic_omega(double tau, int n) {
  if (!(tau > 0.0)) throw std::invalid_argument("magic_omega: tau must be positive");
  if (n < 1) throw std::invalid_argument("magic_omega: n must be at least 1");
  return 2.0 * kPi * n / tau;
}

const std::vector<std::string>& protocol_names() {
  static const std::vector<std::string> names = {"fe",  "uni",  "uni_mod", "hahn",  "pdd", "sdd",
                                                 "cdd2", "suni", "cuni2",   "cudd", "qdd"};
  return names;
}

bool ProtocolSpec::magic_bias() const {
  return name == "uni" || name == "uni_mod" || name == "suni" || name == "cuni2" || name == "hahn";
}

ProtocolSpec parse_protocol(const std::string& token) {
  ProtocolSpec p;
  p.token = token;
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : token) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  p.name = parts[0];
  const auto& names = protocol_names();
  if (std::find(names.begin(), names.end(), p.name) == names.end())
    throw std::invalid_argument("unknown protocol '" + p.name + "' in '" + token + "'");
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw std::invalid_argument("protocol '" + token + "': expected key=value");
    const std::string k = parts[i].substr(0, eq);
    const std::string v = parts[i].substr(eq + 1);
    if (k == "tau") p.tau = to_double(k, v);
    else if (k == "domega") p.domega = to_double(k, v);
    else if (k == "omega") p.omega = to_double(k, v);
    else if (k == "eps") p.epsilon = to_double(k, v);
    else if (k == "tau_c") p.tau_c = to_double(k, v);
    else if (k == "n") p.n = static_cast<int>(to_integer(k, v));
    else throw std::invalid_argument("protocol '" + token + "': unknown parameter '" + k + "'");
  }
  if (p.epsilon && p.name != "uni" && p.name != "uni_mod")
    throw std::invalid_argument("protocol '" + token + "': eps applies to uni and uni_mod only");
  if (p.n && p.name != "cudd" && p.name != "qdd")
    throw std::invalid_argument("protocol '" + token + "': n applies to cudd and qdd only");
  return p;
}

Sequence build_sequence(const ProtocolSpec& p, double tau, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("build_sequence: horizon must be positive");
  if (p.name == "fe" || p.name == "hahn") throw std::invalid_argument("build_sequence: " + p.name + " is run point by point");
  if (p.name == "cudd" || p.name == "qdd") {
    const int n = p.n.value_or(p.name == "cudd" ? 52 : 13);
    const int np = p.name == "cudd" ? 4 * n + 2 : (n + 1) * (n + 2);
    const double span = np * tau;
    const int L = std::max(1, static_cast<int>(std::ceil(horizon / span - 1e-9)));
    Sequence cycle = p.name == "cudd" ? cudd(n, span) : qdd(n, span);
    return repeat(cycle, L, cycle.label);
  }
  const double span = cycle_taus(p.name) * tau;
  const int L = std::max(1, static_cast<int>(std::ceil(horizon / span - 1e-9)));
  Sequence cycle = one_cycle(p, tau);
  return repeat(cycle, L, cycle.label.empty() ? p.name : cycle.label);
}

Sequence budget_sequence(const ProtocolSpec& p, int pulses, double t, double* tau_out) {
  if (pulses < 1) throw std::invalid_argument("budget_sequence: pulse budget must be positive");
  Sequence s;
  double tau = 0.0;
  if (p.name == "cudd") {
    const int n = p.n.value_or((pulses - 2) / 4);
    s = cudd(n, t);
  } else if (p.name == "qdd") {
    int n = p.n.value_or(0);
    if (!p.n)
      while ((n + 1) * (n + 2) < pulses) ++n;
    s = qdd(n, t);
  } else {
    const int per_cycle = uni_family_cycle_pulses(p.name);
    if (per_cycle == 0) throw std::invalid_argument("budget_sequence: no budget form for '" + p.name + "'");
    if (pulses % per_cycle != 0)
      throw std::invalid_argument("budget_sequence: " + std::to_string(pulses) + " pulses is not a whole number of " +
                                  p.name + " cycles");
    const int L = pulses / per_cycle;
    tau = t / (static_cast<double>(L) * cycle_taus(p.name));
    s = repeat(one_cycle(p, tau), L, p.name);
    s.marks.assign(1, s.events.size());
  }
  if (s.pulse_count() != static_cast<std::size_t>(pulses))
    throw std::invalid_argument("budget_sequence: '" + p.token + "' applies " + std::to_string(s.pulse_count()) +
                                " pulses, budget is " + std::to_string(pulses));
  if (tau_out) *tau_out = tau;
  return s;
}

void ExperimentConfig::validate() const {
  if (version != kConfigVersion) throw std::invalid_argument("config: unsupported version " + std::to_string(version));
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("config: horizon must be positive");
  if (!(fe_step > 0.0) || !(fe_horizon > 0.0)) throw std::invalid_argument("config: fe.step and fe.horizon must be positive");
  if (record_every < 1) throw std::invalid_argument("config: record_every must be >= 1");
  if (stop_level < 0.0 || stop_level >= 1.0) throw std::invalid_argument("config: stop_level must lie in [0, 1)");
  if (protocols.empty()) throw std::invalid_argument("config: no protocols");
  for (const auto& t : protocols) parse_protocol(t);
  if (mode == "omega_scan" && !(scan_step > 0.0 && scan_max >= scan_min))
    throw std::invalid_argument("config: bad omega scan grid");
  if (mode == "budget_scan") {
    if (budget_times.empty()) throw std::invalid_argument("config: budget.times is empty");
    for (double t : budget_times)
      if (!(t > 0.0)) throw std::invalid_argument("config: budget times must be positive");
  }
  if (bath_samples < 1) throw std::invalid_argument("config: bath.samples must be >= 1");
  StrayFieldConfig{b_c, tau_c, realizations, seed}.validate();
  prop.validate();
  if (model == "bec") {
    BecModel{J, c2p, 0.0, gamma}.validate();
    if (initial == "sss" && !(sss_xi2 > 0.0 && sss_xi2 <= 1.0)) throw std::invalid_argument("config: sss.xi2 must lie in (0, 1]");
  } else if (model == "qd") {
    if (grid.sites() > max_sites)
      throw ResourceError("config: " + std::to_string(grid.sites()) + " nuclear sites exceed max_sites = " +
                          std::to_string(max_sites));
  } else if (nv_N > max_sites) {
    throw ResourceError("config: nv.N exceeds max_sites");
  }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

const std::vector<std::string>& preset_ids() {
  static const std::vector<std::string> ids = {"fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b",
                                               "fig4",  "s1",    "s2",    "s3",    "s4",    "custom"};
  return ids;
}

std::string preset_description(const std::string& id) {
  static const std::map<std::string, std::string> d = {
      {"fig2a", "BEC, CSS: worst-case j/J under Uni-DD at omega - omega_m in {-2..2} and free evolution"},
      {"fig2b", "BEC, CSS: T0.9 of Uni-DD over an omega scan around the magic bias"},
      {"fig2c", "BEC, SSS: worst-case squeezing under Uni-DD at omega - omega_m in {-2..2}"},
      {"fig2d", "BEC, SSS: T0.05 of Uni-DD over an omega scan"},
      {"fig3a", "QD: worst-case fidelity under Uni-DD at detuned biases, Hahn echo and free evolution"},
      {"fig3b", "QD: T0.9 of Uni-DD over an omega scan"},
      {"fig4", "QD: pulse-angle errors, plain and modified Uni-DD at eps = 0, 1%, 3%"},
      {"s1", "BEC: Uni-DD vs Hahn echo at tau_c = 0.5, 3, 30"},
      {"s2", "QD: equidistant protocols (Uni-DD, SUni-DD, CUni-DD2, PDD, SDD, CDD2)"},
      {"s3", "QD with 5x dipolar couplings: Uni-DD, CUDD52, QDD13 at 210 pulses"},
      {"s4", "NV center: Uni-DD vs free evolution"},
      {"custom", "defaults only; set every parameter in the config file"},
  };
  auto it = d.find(id);
  if (it == d.end()) throw std::invalid_argument("unknown experiment id '" + id + "'");
  return it->second;
}

ExperimentConfig preset(const std::string& id) {
  preset_description(id);  // validates the id
  ExperimentConfig c;
  c.experiment = id;
  auto bec = [&] {
    c.model = "bec";
    c.J = 100.0;
    c.realizations = 20;
    c.tau = 0.05;
    c.horizon = 300.0;
    c.fe_step = 0.01;
    c.fe_horizon = 5.0;
    c.record_every = 10;
  };
  auto qd = [&] {
    c.model = "qd";
    c.grid = HyperfineGrid{};
    c.grid.nx = 2;
    c.grid.ny = 5;
    c.gamma_max = 0.01;
    c.bath_samples = 1;
    c.tau = 0.05;
    c.horizon = 400.0;
    c.fe_step = 0.01;
    c.fe_horizon = 5.0;
    c.stop_level = 0.8;
    c.record_every = 10;
  };
  const std::vector<std::string> detuned = {"fe", "uni:domega=-2", "uni:domega=-1", "uni", "uni:domega=1", "uni:domega=2"};
  if (id == "fig2a" || id == "fig2c") {
    bec();
    c.protocols = detuned;
    if (id == "fig2c") c.initial = "sss";
  } else if (id == "fig2b" || id == "fig2d") {
    bec();
    c.mode = "omega_scan";
    c.protocols = {"fe", "uni"};
    if (id == "fig2d") c.initial = "sss";
  } else if (id == "fig3a") {
    qd();
    c.protocols = detuned;
    c.protocols.insert(c.protocols.begin() + 1, "hahn");
  } else if (id == "fig3b") {
    qd();
    c.mode = "omega_scan";
    c.protocols = {"fe", "uni"};
    c.stop_level = 0.85;
  } else if (id == "fig4") {
    qd();
    c.protocols = {"fe", "uni", "uni:eps=0.01", "uni_mod:eps=0.01", "uni_mod:eps=0.03"};
    c.horizon = 20.0;
    c.stop_level = 0.0;
  } else if (id == "s1") {
    bec();
    c.horizon = 100.0;
    c.fe_horizon = 100.0;
    c.fe_step = 0.1;
    c.record_every = 1;
    c.protocols.clear();
    for (const char* tc : {"0.5", "3", "30"})
      for (const char* p : {"fe", "hahn", "uni"}) c.protocols.push_back(std::string(p) + ":tau_c=" + tc);
  } else if (id == "s2") {
    qd();
    c.protocols = {"fe", "uni", "uni:tau=0.1", "suni", "cuni2", "pdd", "sdd", "cdd2"};
  } else if (id == "s3") {
    qd();
    c.gamma_max = 0.05;
    c.mode = "budget_scan";
    c.protocols = {"fe", "uni", "cudd:n=52", "qdd:n=13"};
    c.budget_pulses = 210;
    c.budget_times = {5, 10, 20, 40, 80, 160, 320};
    c.stop_level = 0.5;
  } else if (id == "s4") {
    qd();
    c.model = "nv";
    c.nv_N = 10;
    c.protocols = {"fe", "uni"};
    c.horizon = 100.0;
    c.fe_step = 0.005;
    c.fe_horizon = 2.0;
  }
  return c;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  std::vector<std::tuple<int, std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  bool have_version = false;
  std::string experiment;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "version") have_version = true;
    if (key == "experiment") experiment = value;
    kv.emplace_back(lineno, key, value);
  }
  if (!have_version) throw std::invalid_argument("config: missing 'version' line");
  ExperimentConfig cfg = experiment.empty() ? ExperimentConfig{} : preset(experiment);
  for (const auto& [no, key, value] : kv) {
    try {
      set_config_value(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

const MetricSeries& PointResult::metric(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m;
  throw std::out_of_range("point " + id + ": no metric '" + name + "'");
}

const CharacteristicTime& PointResult::time(const std::string& key) const {
  for (const auto& [k, v] : characteristic)
    if (k == key) return v;
  throw std::out_of_range("point " + id + ": no characteristic time '" + key + "'");
}

const PointResult& ExperimentResult::point(const std::string& token) const {
  for (const auto& p : points)
    if (p.protocol.token == token) return p;
  throw std::out_of_range("no point for protocol '" + token + "'");
}

namespace {

struct PointPlan {
  PointResult res;
  std::optional<double> offset;  // omega-scan offset
};

/// Everything a task needs that is computed once per experiment.
struct Context {
  const ExperimentConfig& cfg;
  BecModel bec;
  SpinMoments reference;
  StateVector reference_state;
  QdModel qd;
  NvModel nv;

  explicit Context(const ExperimentConfig& c) : cfg(c) {}

  int register_sites() const { return cfg.model == "qd" ? qd.N : nv.N; }

  SpinRegister make_reg(double omega) const {
    if (cfg.model == "qd") {
      QdModel m = qd;
      m.omega = omega;
      return make_register(m, omega != 0.0);
    }
    NvModel m = nv;
    m.omega = omega;
    return make_register(m, omega != 0.0);
  }
};

bool below_stop(const ExperimentConfig& cfg, const Eigen::VectorXd& s) {
  return cfg.stop_level > 0.0 && worst_fidelity(s) < cfg.stop_level;
}

// 2 k tau for k = 1 .. while <= horizon
std::vector<double> echo_times(double tau, double horizon) {
  std::vector<double> t;
  for (long k = 1;; ++k) {
    const double tk = 2.0 * static_cast<double>(k) * tau;
    if (tk > horizon * (1.0 + 1e-12)) break;
    t.push_back(tk);
  }
  return t;
}

Eigen::VectorXd bec_sample(const Context& ctx, const Mat3& R) {
  Eigen::VectorXd s(kBecSampleWidth);
  for (int k = 0; k < 4; ++k) {
    const Mat3 start = so3_matrix(rotation_between(Vec3::UnitZ(), benchmark_axes()[k]));
    const SpinMoments m = ctx.reference.rotated(R * start);
    const int o = 9 * k;
    s.segment<3>(o) = m.mean;
    s(o + 3) = m.second(0, 0);
    s(o + 4) = m.second(0, 1);
    s(o + 5) = m.second(0, 2);
    s(o + 6) = m.second(1, 1);
    s(o + 7) = m.second(1, 2);
    s(o + 8) = m.second(2, 2);
  }
  return s;
}

Trajectory run_bec_task(const Context& ctx, const PointResult& pt, int r) {
  const ExperimentConfig& cfg = ctx.cfg;
  BecModel model = ctx.bec;
  model.omega = pt.omega;
  StrayFieldConfig nc{cfg.b_c, pt.tau_c, cfg.realizations, cfg.seed};
  const ProtocolSpec& p = pt.protocol;

  if (p.name == "hahn" || pt.budget) {
    const std::vector<double> grid = pt.budget ? cfg.budget_times : echo_times(pt.tau, cfg.horizon);
    const double T = *std::max_element(grid.begin(), grid.end());
    const NoiseRealization noise = sample_realization(nc, static_cast<std::uint64_t>(r), T);
    Trajectory tr;
    tr.realization = static_cast<std::uint64_t>(r);
    tr.times.push_back(0.0);
    tr.samples.push_back(bec_sample(ctx, Mat3::Identity()));
    for (double t : grid) {
      BecModel m = model;
      Sequence seq;
      if (pt.budget) {
        double tau = 0.0;
        seq = budget_sequence(p, cfg.budget_pulses, t, &tau);
        if (p.magic_bias()) m.omega = (p.omega ? *p.omega : magic_omega(tau)) + p.domega.value_or(0.0);
      } else {
        seq = hahn(t, model.omega);
      }
      tr.times.push_back(t);
      tr.samples.push_back(bec_sample(ctx, run_rotations(m, seq, noise)));
    }
    return tr;
  }

  const Sequence seq = p.name == "fe" ? free_evolution(cfg.fe_step, cfg.fe_horizon) : build_sequence(p, pt.tau, cfg.horizon);
  const NoiseRealization noise = sample_realization(nc, static_cast<std::uint64_t>(r), seq.total_time());
  Trajectory tr = cfg.bec_engine == "dense" ? bec_benchmark_dense(model, seq, noise, ctx.reference_state)
                                            : bec_benchmark(model, seq, noise, ctx.reference);
  tr.realization = static_cast<std::uint64_t>(r);
  return tr;
}

Trajectory run_register_task(const Context& ctx, const PointResult& pt, int r) {
  const ExperimentConfig& cfg = ctx.cfg;
  const ProtocolSpec& p = pt.protocol;
  const ComplexVector bath = random_bath_state(ctx.register_sites(), cfg.seed, static_cast<std::uint64_t>(r));
  const SampleStop stop = [&](double, const Eigen::VectorXd& s) { return below_stop(cfg, s); };

  if (p.name == "hahn" || pt.budget) {
    const std::vector<double> grid = pt.budget ? cfg.budget_times : echo_times(pt.tau, cfg.horizon);
    Trajectory tr;
    tr.realization = static_cast<std::uint64_t>(r);
    tr.times.push_back(0.0);
    ComplexBlock start = ComplexBlock::Zero(2 * bath.size(), 2);
    start.col(0).head(bath.size()) = bath;
    start.col(1).tail(bath.size()) = bath;
    tr.samples.push_back(register_sample(start));
    std::unique_ptr<RegisterPropagator> prop;
    double prop_omega = std::nan("");
    for (double t : grid) {
      Sequence seq;
      double omega = pt.omega;
      if (pt.budget) {
        double tau = 0.0;
        seq = budget_sequence(p, cfg.budget_pulses, t, &tau);
        if (p.magic_bias()) omega = (p.omega ? *p.omega : magic_omega(tau)) + p.domega.value_or(0.0);
      } else {
        seq = hahn(t, omega);
      }
      if (!prop || omega != prop_omega) {
        prop = std::make_unique<RegisterPropagator>(ctx.make_reg(omega), cfg.prop);
        prop_omega = omega;
      }
      const Trajectory one = register_benchmark(*prop, seq, bath);
      tr.times.push_back(t);
      tr.samples.push_back(one.samples.back());
      if (below_stop(cfg, tr.samples.back())) break;
    }
    return tr;
  }

  RegisterPropagator prop(ctx.make_reg(pt.omega), cfg.prop);
  const Sequence seq = p.name == "fe" ? free_evolution(cfg.fe_step, cfg.fe_horizon) : build_sequence(p, pt.tau, cfg.horizon);
  Trajectory tr = register_benchmark(prop, seq, bath, stop);
  tr.realization = static_cast<std::uint64_t>(r);
  return tr;
}

void finalize(PointResult& pt, const Trajectory& avg, const ExperimentConfig& cfg) {
  pt.times = avg.times;
  if (cfg.model == "bec") {
    pt.metrics = bec_metrics(avg, cfg.J);
  } else {
    pt.metrics = register_metrics(avg);
  }
  for (const auto& m : pt.metrics) {
    const double level = m.crossing == Crossing::falling ? 0.9 : 0.05;
    const std::string key = (m.crossing == Crossing::falling ? "T0.9[" : "T0.05[") + m.name + "]";
    pt.characteristic.emplace_back(key, characteristic_time(pt.times, m.worst, level, m.crossing));
  }
}

std::vector<PointPlan> plan_points(const ExperimentConfig& cfg) {
  std::vector<PointPlan> plans;
  for (const auto& token : cfg.protocols) {
    const ProtocolSpec p = parse_protocol(token);
    PointResult base;
    base.protocol = p;
    base.tau = p.tau.value_or(cfg.tau);
    base.epsilon = p.epsilon.value_or(0.0);
    base.tau_c = cfg.model == "bec" ? p.tau_c.value_or(cfg.tau_c) : kInf;
    base.realizations = cfg.model == "bec" ? cfg.realizations : cfg.bath_samples;
    const double bias = p.omega ? *p.omega : (p.magic_bias() ? magic_omega(base.tau) : 0.0);
    base.omega = bias + p.domega.value_or(0.0);
    base.budget = cfg.mode == "budget_scan" && p.name != "fe";
    if (cfg.mode == "omega_scan" && p.name != "fe") {
      const long count = std::lround((cfg.scan_max - cfg.scan_min) / cfg.scan_step) + 1;
      for (long k = 0; k < count; ++k) {
        const double off = cfg.scan_min + static_cast<double>(k) * cfg.scan_step;
        PointPlan pp{base, off};
        pp.res.omega = base.omega + off;
        plans.push_back(pp);
      }
    } else {
      plans.push_back({base, std::nullopt});
    }
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%03zu", i);
    plans[i].res.id = buf;
  }
  return plans;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  Context ctx(cfg);

  if (cfg.model == "bec") {
    ctx.bec = BecModel{cfg.J, cfg.c2p, 0.0, cfg.gamma};
    if (cfg.J > 200.0 || cfg.scale == "paper")
      result.warnings.push_back("resource: J = " + fmt(cfg.J) + " is beyond desk scale");
    if (cfg.initial == "sss") {
      SqueezingOptions opts;
      opts.method = cfg.sss_method == "one_axis" ? SqueezingMethod::one_axis : SqueezingMethod::two_axis;
      opts.mean_axis = Vec3::UnitZ();
      const SqueezedState s = squeezed_spin_state(cfg.J, cfg.sss_xi2, opts);
      ctx.reference_state = s.state;
      result.notes.emplace_back("sss.achieved_xi2", fmt(s.xi2));
      result.notes.emplace_back("sss.theta", fmt(s.theta));
    } else {
      ctx.reference_state = coherent_spin_state(cfg.J, Vec3::UnitZ());
    }
    ctx.reference = spin_moments(ctx.reference_state, sparse_spin_operators(cfg.J));
  } else if (cfg.model == "qd") {
    ctx.qd = make_qd_model(cfg.grid, cfg.gamma_max, 0.0, cfg.seed);
    ctx.qd.max_sites = cfg.max_sites;
    ctx.qd.validate();
    const auto [lo, hi] = std::minmax_element(ctx.qd.couplings.begin(), ctx.qd.couplings.end());
    result.notes.emplace_back("qd.N", std::to_string(ctx.qd.N));
    result.notes.emplace_back("qd.A_min", fmt(*lo));
    result.notes.emplace_back("qd.A_max", fmt(*hi));
    if (ctx.qd.N > 12) result.warnings.push_back("resource: N = " + std::to_string(ctx.qd.N) + " is beyond desk scale");
  } else {
    ctx.nv = make_nv_model(cfg.nv_N, 0.0, cfg.seed);
    ctx.nv.max_sites = cfg.max_sites;
    ctx.nv.validate();
    if (ctx.nv.N > 12) result.warnings.push_back("resource: N = " + std::to_string(ctx.nv.N) + " is beyond desk scale");
  }

  std::vector<PointPlan> plans = plan_points(cfg);
  struct Task {
    std::size_t point;
    int realization;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < plans.size(); ++i)
    for (int r = 0; r < plans[i].res.realizations; ++r) tasks.push_back({i, r});

  // Streaming reduction: realizations of a point are summed strictly in index order.
  struct Accumulator {
    int next = 0;
    std::map<int, Trajectory> pending;
    Trajectory sum;
    bool started = false;
  };
  std::vector<Accumulator> acc(plans.size());
  std::mutex mu;
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  std::set<std::string> seq_warnings;

  auto absorb = [&](std::size_t i, Trajectory tr, int r) {
    Accumulator& a = acc[i];
    a.pending.emplace(r, std::move(tr));
    while (!a.pending.empty() && a.pending.begin()->first == a.next) {
      Trajectory t = std::move(a.pending.begin()->second);
      a.pending.erase(a.pending.begin());
      if (!a.started) {
        a.sum = std::move(t);
        a.started = true;
      } else {
        const std::size_t n = std::min(a.sum.size(), t.size());
        a.sum.truncate(n);
        for (std::size_t k = 0; k < n; ++k) a.sum.samples[k] += t.samples[k];
      }
      ++a.next;
    }
    if (a.next == plans[i].res.realizations) {
      for (auto& s : a.sum.samples) s /= static_cast<double>(plans[i].res.realizations);
      finalize(plans[i].res, a.sum, cfg);
      a.sum = Trajectory{};
    }
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= tasks.size()) return;
      const Task& task = tasks[k];
      try {
        const PointResult& pt = plans[task.point].res;
        Trajectory tr = cfg.model == "bec" ? run_bec_task(ctx, pt, task.realization)
                                           : run_register_task(ctx, pt, task.realization);
        std::lock_guard<std::mutex> lock(mu);
        absorb(task.point, std::move(tr), task.realization);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int nworkers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(tasks.size())));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& p : plans) {
    if (p.res.protocol.name == "hahn" && cfg.mode != "budget_scan") {
      const double turns = p.res.omega * p.res.tau / (2.0 * kPi);
      if (std::abs(turns - std::round(turns)) > 1e-9)
        seq_warnings.insert("hahn '" + p.res.protocol.token + "': bias is off the magic condition");
    }
    result.points.push_back(p.res);
  }
  result.warnings.insert(result.warnings.end(), seq_warnings.begin(), seq_warnings.end());
  return result;
}

void write_csv(std::ostream& out, const ExperimentResult& result) {
  const ExperimentConfig& cfg = result.config;
  out << "# ddsim_csv_version=" << kCsvVersion << "\n";
  for (const auto& [k, v] : cfg.entries()) {
    if (k == "workers" || k == "out") continue;  // do not affect the data
    out << "# " << k << "=" << v << "\n";
  }
  for (const auto& [k, v] : result.notes) out << "# note." << k << "=" << v << "\n";
  out << "experiment,point_id,protocol,omega,tau,epsilon,tau_c,t,metric,value,r,seed\n";
  const std::string seed = std::to_string(cfg.seed);
  for (const auto& pt : result.points) {
    const std::string prefix = cfg.experiment + "," + pt.id + "," + pt.protocol.token + "," + fmt(pt.omega) + "," +
                               (pt.budget ? std::string("var") : fmt(pt.tau)) + "," + fmt(pt.epsilon) + "," +
                               fmt(pt.tau_c) + ",";
    const std::string suffix = "," + std::to_string(pt.realizations) + "," + seed + "\n";
    if (cfg.mode != "omega_scan") {
      const std::size_t n = pt.times.size();
      const std::size_t stride = pt.budget ? 1 : static_cast<std::size_t>(cfg.record_every);
      for (std::size_t i = 0; i < n; ++i) {
        if (i % stride != 0 && i + 1 != n) continue;
        for (const auto& m : pt.metrics) out << prefix << fmt(pt.times[i]) << "," << m.name << "," << fmt(m.worst[i]) << suffix;
      }
    }
    for (const auto& [key, ct] : pt.characteristic)
      out << prefix << fmt(ct.horizon) << "," << key << "," << (ct.reached() ? fmt(*ct.value) : std::string("inf")) << suffix;
  }
}

bool run_verify(std::ostream& report, std::ostream* csv) {
  bool ok = true;
  const std::vector<double> ladder = octave_ladder(magic_omega(0.05), 5);
  if (csv) *csv << "case,omega,tau,distance,coupling_ratio\n";
  auto check = [&](const std::string& name, const std::vector<SuppressionRow>& rows) {
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].distance <= rows[i - 1].distance;
    const bool small = rows.front().distance <= 0.05;
    char buf[200];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "  %-22s omega=%9.3f tau=%.5f d=%.3e ratio=%.3e\n", name.c_str(), r.omega, r.tau,
                    r.distance, r.coupling_ratio);
      report << buf;
      if (csv) *csv << name << "," << fmt(r.omega) << "," << fmt(r.tau) << "," << fmt(r.distance) << "," << fmt(r.coupling_ratio) << "\n";
    }
    std::snprintf(buf, sizeof buf, "%s %s: d(omega_m)=%.3e (<= 0.05), monotone over 4 octaves: %s\n",
                  small && monotone ? "PASS" : "FAIL", name.c_str(), rows.front().distance, monotone ? "yes" : "no");
    report << buf;
    ok = ok && small && monotone;
  };

  BecModel bec;
  bec.J = 20.0;
  CounterRng rng(2024, StreamDomain::sampler_test, 1);
  for (int k = 0; k < 3; ++k) {
    Vec3 b(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (b.norm() > 1.0) b.normalize();
    check("classical J=20 b#" + std::to_string(k), suppression_factor(bec, b, ladder));
  }
  HyperfineGrid g;
  g.nx = 2;
  g.ny = 2;
  QdModel qd = make_qd_model(g, 0.0, 0.0, 1);
  qd.dipolar.clear();
  check("quantum N=4", suppression_factor(qd, ladder));
  return ok;
}

}  // namespace ddsim
