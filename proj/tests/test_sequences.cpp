#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ddsim/sequences.hpp"

using namespace ddsim;

TEST_CASE("uni-dd cycle layout") {
  const Sequence s = uni_dd(0.05, 3);
  CHECK(s.pulse_count() == 6);
  CHECK(s.delay_count() == 6);
  CHECK(s.total_time() == doctest::Approx(0.3));
  CHECK(s.marks.size() == 3);
  REQUIRE(s.events.size() == 12);
  CHECK(s.events[0].is_delay());
  CHECK(!s.events[1].is_delay());
  CHECK(s.events[1].rotation.axis() == Vec3::UnitY());
  const Sequence m = uni_dd(0.05, 1, 0.02, true);
  CHECK(m.events[3].rotation.axis() == -Vec3::UnitY());
  CHECK(m.events[3].rotation.angle() == doctest::Approx(0.98 * kPi));
  const auto t = s.mark_times();
  CHECK(t.back() == doctest::Approx(0.3));
}

TEST_CASE("pulse counts of the equidistant protocols") {
  CHECK(pdd(0.1, 1).pulse_count() == 4);
  CHECK(pdd(0.1, 1).total_time() == doctest::Approx(0.4));
  CHECK(sdd(0.1, 1).pulse_count() == 6);
  CHECK(sdd(0.1, 1).total_time() == doctest::Approx(0.8));
  CHECK(cdd2(0.1, 1).pulse_count() == 20);
  CHECK(cdd2(0.1, 1).total_time() == doctest::Approx(1.6));
  CHECK(suni_dd(0.1, 1).pulse_count() == 2);
  CHECK(suni_dd(0.1, 1).total_time() == doctest::Approx(0.4));
  CHECK(concat_uni(0.1, 2).pulse_count() == 10);
  CHECK(concat_uni(0.1, 2).total_time() == doctest::Approx(1.6));
}

TEST_CASE("overbar flips the bias sign") {
  const Sequence s = symmetrize(uni_dd(0.1, 1));
  int plus = 0, minus = 0;
  for (const auto& e : s.events)
    if (e.is_delay()) (e.bias_sign > 0 ? plus : minus)++;
  CHECK(plus == 2);
  CHECK(minus == 2);
}

TEST_CASE("uhrig grid") {
  const auto t = uhrig_times(5, 2.0);
  REQUIRE(t.size() == 5);
  CHECK(t[0] == 0.0);
  CHECK(t[4] == 2.0);
  for (int j = 1; j < 4; ++j) CHECK(t[j] == doctest::Approx(2.0 * std::pow(std::sin(j * kPi / 8.0), 2)));
  CHECK(t[2] == doctest::Approx(1.0));
}

TEST_CASE("CUDD and QDD pulse budgets") {
  CHECK(cudd(52, 10.0).pulse_count() == 210);
  CHECK(cudd(52, 10.0).total_time() == doctest::Approx(10.0));
  CHECK(qdd(13, 10.0).pulse_count() == 210);
  CHECK(qdd(13, 10.0).total_time() == doctest::Approx(10.0));
  CHECK(qdd(1, 1.0).pulse_count() == 6);
  CHECK_THROWS(qdd(2, 1.0));
}

TEST_CASE("hahn echo warns off the magic condition") {
  CHECK(hahn(0.1, 2 * kPi / 0.05).warnings.empty());
  CHECK(!hahn(0.1, 2 * kPi / 0.05 + 1.0).warnings.empty());
  CHECK(hahn(0.1).pulse_count() == 2);
}

TEST_CASE("serialization round trip") {
  Sequence s = uni_dd(0.0123456789, 2, 0.01, true);
  s.label = "uni_mod";
  std::stringstream io;
  write_sequence(io, s);
  const Sequence r = read_sequence(io);
  REQUIRE(r.events.size() == s.events.size());
  for (std::size_t k = 0; k < s.events.size(); ++k) {
    CHECK(r.events[k].kind == s.events[k].kind);
    CHECK(r.events[k].duration == s.events[k].duration);
    CHECK(r.events[k].bias_sign == s.events[k].bias_sign);
    CHECK(r.events[k].rotation.angle() == s.events[k].rotation.angle());
    CHECK(r.events[k].rotation.axis() == s.events[k].rotation.axis());
  }
  CHECK(r.marks == s.marks);
  CHECK(r.label == "uni_mod");
  std::stringstream bad("D -1 1\n");
  CHECK_THROWS(read_sequence(bad));
}

TEST_CASE("free evolution sampling") {
  const Sequence f = free_evolution(0.3, 1.0);
  CHECK(f.pulse_count() == 0);
  CHECK(f.total_time() == doctest::Approx(1.0));
  CHECK(f.marks.size() == 4);
}
