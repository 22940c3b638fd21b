#include "ddsim/sequences.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ddsim {

namespace {

void require_tau(double tau, const char* who) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument(std::string(who) + ": tau must be positive");
}

void require_cycles(int L, const char* who) {
  if (L < 1) throw std::invalid_argument(std::string(who) + ": need at least one cycle");
}

// Delays between consecutive grid points.
std::vector<double> intervals(const std::vector<double>& grid) {
  std::vector<double> d;
  for (std::size_t j = 1; j < grid.size(); ++j) d.push_back(grid[j] - grid[j - 1]);
  return d;
}

}  // namespace

SequenceEvent SequenceEvent::delay(double duration, int bias_sign) {
  SequenceEvent e;
  e.kind = EventKind::delay;
  e.duration = duration;
  e.bias_sign = bias_sign;
  return e;
}

SequenceEvent SequenceEvent::pulse(const Rotation& rot) {
  SequenceEvent e;
  e.kind = EventKind::pulse;
  e.rotation = rot;
  return e;
}

double Sequence::total_time() const {
  double t = 0.0;
  for (const auto& e : events)
    if (e.is_delay()) t += e.duration;
  return t;
}

std::size_t Sequence::pulse_count() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.is_delay() ? 0 : 1;
  return n;
}

std::size_t Sequence::delay_count() const { return events.size() - pulse_count(); }

std::vector<double> Sequence::mark_times() const {
  std::vector<double> out;
  double t = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i <= events.size(); ++i) {
    while (m < marks.size() && marks[m] == i) {
      out.push_back(t);
      ++m;
    }
    if (i < events.size() && events[i].is_delay()) t += events[i].duration;
  }
  return out;
}

void Sequence::validate() const {
  for (const auto& e : events) {
    if (e.is_delay()) {
      if (!(e.duration >= 0.0) || !std::isfinite(e.duration))
        throw std::invalid_argument("sequence " + label + ": negative or non-finite delay");
      if (e.bias_sign != 1 && e.bias_sign != -1)
        throw std::invalid_argument("sequence " + label + ": bias sign must be +1 or -1");
    }
  }
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (marks[i] > events.size() || (i > 0 && marks[i] < marks[i - 1]))
      throw std::invalid_argument("sequence " + label + ": marks must be sorted and within the event list");
  }
}

Sequence& Sequence::append(const Sequence& other) {
  const std::size_t offset = events.size();
  events.insert(events.end(), other.events.begin(), other.events.end());
  for (std::size_t m : other.marks) marks.push_back(m + offset);
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  return *this;
}

Sequence& Sequence::add_delay(double duration, int bias_sign) {
  events.push_back(SequenceEvent::delay(duration, bias_sign));
  return *this;
}

Sequence& Sequence::add_pulse(const Rotation& rot) {
  events.push_back(SequenceEvent::pulse(rot));
  return *this;
}

Sequence& Sequence::mark() {
  marks.push_back(events.size());
  return *this;
}

Rotation x_pulse(double epsilon) { return Rotation(Vec3::UnitX(), (1.0 - epsilon) * kPi); }
Rotation y_pulse(double epsilon) { return Rotation(Vec3::UnitY(), (1.0 - epsilon) * kPi); }
Rotation ybar_pulse(double epsilon) { return Rotation(-Vec3::UnitY(), (1.0 - epsilon) * kPi); }
Rotation z_pulse(double epsilon) { return Rotation(Vec3::UnitZ(), (1.0 - epsilon) * kPi); }

Sequence repeat(const Sequence& cycle, int L, const std::string& label) {
  require_cycles(L, "repeat");
  Sequence out;
  out.label = label;
  out.events.reserve(cycle.events.size() * static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    out.events.insert(out.events.end(), cycle.events.begin(), cycle.events.end());
    out.mark();
  }
  out.warnings = cycle.warnings;
  return out;
}

Sequence overbar(const Sequence& block) {
  Sequence out = block;
  for (auto& e : out.events)
    if (e.is_delay()) e.bias_sign = -e.bias_sign;
  return out;
}

Sequence symmetrize(const Sequence& block) {
  Sequence out = block;
  out.marks.clear();
  Sequence bar = overbar(block);
  bar.marks.clear();
  return out.append(bar);
}

Sequence free_evolution(double step, double horizon) {
  require_tau(step, "free_evolution");
  require_tau(horizon, "free_evolution");
  Sequence s;
  s.label = "fe";
  const auto n = static_cast<long>(std::ceil(horizon / step * (1.0 - 1e-12)));
  for (long k = 0; k < n; ++k) {
    const double end = std::min(horizon, static_cast<double>(k + 1) * step);
    s.add_delay(end - static_cast<double>(k) * step).mark();
  }
  return s;
}

Sequence uni_dd(double tau, int L, double epsilon, bool modified) {
  require_tau(tau, "uni_dd");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("uni_dd: epsilon must lie in [0, 1)");
  Sequence cycle;
  cycle.add_delay(tau).add_pulse(y_pulse(epsilon)).add_delay(tau);
  cycle.add_pulse(modified ? ybar_pulse(epsilon) : y_pulse(epsilon));
  return repeat(cycle, L, modified ? "uni_mod" : "uni");
}

Sequence pdd(double tau, int L) {
  require_tau(tau, "pdd");
  Sequence cycle;
  for (int k = 0; k < 2; ++k) cycle.add_delay(tau).add_pulse(x_pulse()).add_delay(tau).add_pulse(z_pulse());
  return repeat(cycle, L, "pdd");
}

Sequence sdd(double tau, int L) {
  require_tau(tau, "sdd");
  Sequence half;
  half.add_delay(tau).add_pulse(x_pulse()).add_delay(tau).add_pulse(z_pulse());
  half.add_delay(tau).add_pulse(x_pulse()).add_delay(tau);
  Sequence cycle = half;
  cycle.append(half);
  return repeat(cycle, L, "sdd");
}

Sequence cdd2(double tau, int L) {
  require_tau(tau, "cdd2");
  Sequence c1 = pdd(tau, 1);
  c1.marks.clear();
  Sequence cycle;
  for (int k = 0; k < 2; ++k) {
    cycle.append(c1).add_pulse(x_pulse());
    cycle.append(c1).add_pulse(z_pulse());
  }
  return repeat(cycle, L, "cdd2");
}

Sequence hahn(double t, std::optional<double> omega) {
  require_tau(t, "hahn");
  Sequence s;
  s.label = "hahn";
  s.add_delay(0.5 * t).add_pulse(y_pulse()).add_delay(0.5 * t).add_pulse(y_pulse()).mark();
  if (omega) {
    const double turns = *omega * 0.5 * t / (2.0 * kPi);
    if (std::abs(turns - std::round(turns)) > 1e-9) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "hahn: omega t/2 = %.12g x 2pi is not a whole number of turns", turns);
      s.warnings.emplace_back(buf);
    }
  }
  return s;
}

Sequence suni_dd(double tau, int L) {
  require_tau(tau, "suni_dd");
  Sequence half;
  half.add_delay(tau).add_pulse(y_pulse()).add_delay(tau);
  return repeat(symmetrize(half), L, "suni");
}

Sequence concat_uni(double tau, int level, int L) {
  require_tau(tau, "concat_uni");
  if (level < 1 || level > 2) throw std::invalid_argument("concat_uni: only levels 1 and 2 are defined");
  Sequence c;
  c.add_delay(tau);
  for (int k = 1; k <= level; ++k) {
    Sequence half = c;
    half.add_pulse(y_pulse()).append(c);
    c = symmetrize(half);
  }
  return repeat(c, L, level == 1 ? "suni" : "cuni" + std::to_string(level));
}

std::vector<double> uhrig_times(int Np, double t) {
  if (Np < 2) throw std::invalid_argument("uhrig_times: Np must be at least 2");
  require_tau(t, "uhrig_times");
  std::vector<double> out(static_cast<std::size_t>(Np));
  for (int j = 0; j < Np; ++j) {
    const double s = std::sin(j * kPi / (2.0 * Np - 2.0));
    out[static_cast<std::size_t>(j)] = t * s * s;
  }
  out.back() = t;  // sin^2(pi/2) up to rounding
  return out;
}

Sequence uhrig_block(int n, double t, bool leading_z) {
  if (n < 1) throw std::invalid_argument("uhrig_block: n must be at least 1");
  const auto d = intervals(uhrig_times(n + 2, t));
  Sequence s;
  for (std::size_t j = 0; j < d.size(); ++j) {
    s.add_delay(d[j]);
    if (j + 1 < d.size()) s.add_pulse(z_pulse());
  }
  if (leading_z) s.add_pulse(z_pulse());
  return s;
}

Sequence cudd(int n, double t) {
  if (n < 1) throw std::invalid_argument("cudd: n must be at least 1");
  require_tau(t, "cudd");
  const Sequence b = uhrig_block(n, 0.25 * t);
  Sequence s;
  s.label = "cudd" + std::to_string(n);
  s.append(b).add_pulse(x_pulse()).append(b).append(b).add_pulse(x_pulse()).append(b).mark();
  if (s.pulse_count() != static_cast<std::size_t>(4 * n + 2)) throw std::logic_error("cudd: pulse count mismatch");
  return s;
}

Sequence qdd(int n, double t) {
  if (n < 1 || n % 2 == 0) throw std::invalid_argument("qdd: n must be a positive odd integer");
  require_tau(t, "qdd");
  Sequence s;
  s.label = "qdd" + std::to_string(n);
  for (double delta : intervals(uhrig_times(n + 2, t))) s.append(uhrig_block(n, delta, true)).add_pulse(x_pulse());
  s.mark();
  if (s.pulse_count() != static_cast<std::size_t>((n + 1) * (n + 2))) throw std::logic_error("qdd: pulse count mismatch");
  return s;
}

void write_sequence(std::ostream& out, const Sequence& seq) {
  char buf[160];
  out << "# label=" << seq.label << "\n";
  std::size_t m = 0;
  for (std::size_t i = 0; i <= seq.events.size(); ++i) {
    while (m < seq.marks.size() && seq.marks[m] == i) {
      out << "M\n";
      ++m;
    }
    if (i == seq.events.size()) break;
    const auto& e = seq.events[i];
    if (e.is_delay()) {
      std::snprintf(buf, sizeof buf, "D %.17g %+d\n", e.duration, e.bias_sign);
    } else {
      const Vec3& a = e.rotation.axis();
      std::snprintf(buf, sizeof buf, "P %.17g %.17g %.17g %.17g\n", a.x(), a.y(), a.z(), e.rotation.angle());
    }
    out << buf;
  }
}

Sequence read_sequence(std::istream& in) {
  Sequence s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag[0] == '#') {
      const auto pos = line.find("label=");
      if (pos != std::string::npos) s.label = line.substr(pos + 6);
      continue;
    }
    bool ok = true;
    if (tag == "D") {
      double d;
      int sign;
      ok = static_cast<bool>(ls >> d >> sign);
      if (ok) s.add_delay(d, sign);
    } else if (tag == "P") {
      double x, y, z, angle;
      ok = static_cast<bool>(ls >> x >> y >> z >> angle);
      if (ok) s.add_pulse(Rotation(Vec3(x, y, z), angle));
    } else if (tag == "M") {
      s.mark();
    } else {
      ok = false;
    }
    std::string extra;
    if (!ok || (ls >> extra)) throw std::invalid_argument("read_sequence: malformed line " + std::to_string(lineno));
  }
  s.validate();
  return s;
}

}  // namespace ddsim
