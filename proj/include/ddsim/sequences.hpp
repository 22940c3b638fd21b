#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ddsim/spin_algebra.hpp"

namespace ddsim {

enum class EventKind { delay, pulse };

/// One step of a sequence: a free evolution of some duration under the bias
/// field with the given sign, or an instantaneous rotation of the central spin.
struct SequenceEvent {
  EventKind kind = EventKind::delay;
  double duration = 0.0;
  int bias_sign = 1;
  Rotation rotation{Vec3::UnitY(), 0.0};

  static SequenceEvent delay(double duration, int bias_sign = 1);
  static SequenceEvent pulse(const Rotation& rot);
  bool is_delay() const { return kind == EventKind::delay; }
};

/// Events in application order: events[0] acts first. Written as an operator
/// product the same cycle reads right to left.
///
/// marks[i] = n requests a record after the first n events (cycle boundaries).
struct Sequence {
  std::string label;
  std::vector<SequenceEvent> events;
  std::vector<std::size_t> marks;
  std::vector<std::string> warnings;

  double total_time() const;
  std::size_t pulse_count() const;
  std::size_t delay_count() const;
  // Times of the marks.
  std::vector<double> mark_times() const;

  // Throws on negative delays, bad bias signs or unsorted marks.
  void validate() const;

  Sequence& append(const Sequence& other);  // marks of other are shifted
  Sequence& add_delay(double duration, int bias_sign = 1);
  Sequence& add_pulse(const Rotation& rot);
  Sequence& mark();
};

// Ideal-or-imperfect pi pulses about the lab axes.
Rotation x_pulse(double epsilon = 0.0);
Rotation y_pulse(double epsilon = 0.0);
Rotation ybar_pulse(double epsilon = 0.0);
Rotation z_pulse(double epsilon = 0.0);

// L copies of cycle with a mark after each copy; marks inside cycle are dropped.
Sequence repeat(const Sequence& cycle, int L, const std::string& label);

// Flips the bias sign of every delay.
Sequence overbar(const Sequence& block);

// block followed by its overbar.
Sequence symmetrize(const Sequence& block);

// Free evolution sampled every step up to horizon (last step may be shorter).
Sequence free_evolution(double step, double horizon);

// [Y U Y U]^L, or [Ybar U Y U]^L when modified; pulses rotate by (1 - epsilon) pi.
Sequence uni_dd(double tau, int L, double epsilon = 0.0, bool modified = false);

// [Z U X U Z U X U]^L
Sequence pdd(double tau, int L);
// [U X U Z U X U U X U Z U X U]^L, six pulses and eight delays per cycle
Sequence sdd(double tau, int L);
// [Z C1 X C1 Z C1 X C1]^L with C1 the PDD cycle; adjacent pulses are not merged
Sequence cdd2(double tau, int L);

// Y U(t/2) Y U(t/2). With omega given, records a warning unless omega t/2 is a
// multiple of 2 pi within 1e-9.
Sequence hahn(double t, std::optional<double> omega = std::nullopt);

// SUni-DD: [Ubar Y Ubar U Y U]^L
Sequence suni_dd(double tau, int L);
// CUni-DD: C_1 = SUni-DD cycle, C_2 = [C1bar Y C1bar C1 Y C1]; L cycles of C_level.
Sequence concat_uni(double tau, int level, int L = 1);

// t_j = t sin^2(j pi / (2 Np - 2)) for j = 0 .. Np - 1, so t_0 = 0 and t_{Np-1} = t.
std::vector<double> uhrig_times(int Np, double t);

// U_{t - t_n} Z U_{tau_n} Z ... U_{tau_2} Z U_{tau_1} on the n-pulse Uhrig grid;
// with leading_z the block is closed by one more Z (the quadratic-DD inner block).
Sequence uhrig_block(int n, double t, bool leading_z = false);

// CUDD_n: B X B B X B with B the n-pulse Uhrig block over t/4; 4n + 2 pulses.
Sequence cudd(int n, double t);
// QDD_n (odd n): outer n-pulse Uhrig grid of X pulses enclosing inner Z blocks;
// (n + 1)(n + 2) pulses.
Sequence qdd(int n, double t);

// Line format: "D <duration> <bias_sign>", "P <ax> <ay> <az> <angle>", "M" for a
// mark, "#" comments. Lines appear in application order.
void write_sequence(std::ostream& out, const Sequence& seq);
Sequence read_sequence(std::istream& in);

}  // namespace ddsim
