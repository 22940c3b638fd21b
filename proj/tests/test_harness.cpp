#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ddsim/harness.hpp"

using namespace ddsim;

namespace {

ExperimentConfig tiny_bec() {
  ExperimentConfig c;
  c.J = 10.0;
  c.realizations = 4;
  c.horizon = 2.0;
  c.fe_horizon = 1.0;
  c.protocols = {"fe", "uni", "uni:domega=1", "hahn"};
  return c;
}

ExperimentConfig tiny_qd() {
  ExperimentConfig c;
  c.model = "qd";
  c.grid.nx = 2;
  c.grid.ny = 2;
  c.bath_samples = 2;
  c.horizon = 1.0;
  c.fe_horizon = 0.5;
  c.protocols = {"fe", "uni", "pdd"};
  return c;
}

std::string csv_of(const ExperimentConfig& c) {
  std::ostringstream out;
  write_csv(out, run_experiment(c));
  return out.str();
}

}  // namespace

TEST_CASE("protocol tokens") {
  const ProtocolSpec p = parse_protocol("uni_mod:eps=0.03:domega=-2");
  CHECK(p.name == "uni_mod");
  CHECK(*p.epsilon == 0.03);
  CHECK(*p.domega == -2.0);
  CHECK(p.magic_bias());
  CHECK(!parse_protocol("pdd").magic_bias());
  CHECK(*parse_protocol("cudd:n=52").n == 52);
  CHECK_THROWS(parse_protocol("bogus"));
  CHECK_THROWS(parse_protocol("uni:foo=1"));
  CHECK_THROWS(parse_protocol("pdd:eps=0.1"));
  CHECK(magic_omega(0.05) == doctest::Approx(125.66370614359172));
}

TEST_CASE("pulse budgets") {
  double tau = 0;
  const Sequence u = budget_sequence(parse_protocol("uni"), 210, 21.0, &tau);
  CHECK(u.pulse_count() == 210);
  CHECK(tau == doctest::Approx(0.1));
  CHECK(u.total_time() == doctest::Approx(21.0));
  CHECK(budget_sequence(parse_protocol("cudd:n=52"), 210, 5.0).pulse_count() == 210);
  CHECK(budget_sequence(parse_protocol("qdd:n=13"), 210, 5.0).pulse_count() == 210);
  CHECK_THROWS(budget_sequence(parse_protocol("qdd:n=11"), 210, 5.0));
  CHECK_THROWS(budget_sequence(parse_protocol("pdd"), 210, 5.0));
}

TEST_CASE("sequences cover the horizon") {
  for (const char* t : {"uni", "uni_mod", "pdd", "sdd", "cdd2", "suni", "cuni2", "cudd:n=4", "qdd:n=3"}) {
    const Sequence s = build_sequence(parse_protocol(t), 0.05, 3.0);
    CHECK(s.total_time() >= 3.0 - 1e-9);
    CHECK(!s.marks.empty());
  }
}

TEST_CASE("config files") {
  std::istringstream in(
      "# comment\n"
      "version = 1\n"
      "experiment = fig2a\n"
      "noise.realizations = 3   # trailing comment\n"
      "noise.tau_c = inf\n"
      "protocols = fe uni:domega=2\n");
  const ExperimentConfig c = parse_config(in);
  CHECK(c.experiment == "fig2a");
  CHECK(c.realizations == 3);
  CHECK(std::isinf(c.tau_c));
  CHECK(c.J == 100.0);
  CHECK(c.protocols.size() == 2);

  std::istringstream unknown("version = 1\nfoo = 2\n");
  try {
    parse_config(unknown);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream noversion("tau = 0.1\n");
  CHECK_THROWS(parse_config(noversion));
  std::istringstream badvalue("version = 1\ntau = fast\n");
  CHECK_THROWS(parse_config(badvalue));
  std::istringstream badversion("version = 2\n");
  CHECK_THROWS(parse_config(badversion));
}

TEST_CASE("every preset validates and round-trips through its entries") {
  for (const auto& id : preset_ids()) {
    const ExperimentConfig c = preset(id);
    CHECK_NOTHROW(c.validate());
    std::ostringstream text;
    for (const auto& [k, v] : c.entries()) text << k << " = " << v << "\n";
    std::istringstream in(text.str());
    const ExperimentConfig r = parse_config(in);
    CHECK(r.entries() == c.entries());
  }
  CHECK_THROWS(preset("fig9"));
}

TEST_CASE("csv layout") {
  const std::string csv = csv_of(tiny_bec());
  CHECK(csv.rfind("# ddsim_csv_version=1\n", 0) == 0);
  CHECK(csv.find("experiment,point_id,protocol,omega,tau,epsilon,tau_c,t,metric,value,r,seed\n") != std::string::npos);
  CHECK(csv.find(",T0.9[spin_avg],") != std::string::npos);
  CHECK(csv.find("custom,p001,uni,125.6637061,0.05,0,inf,") != std::string::npos);
}

TEST_CASE("runs are deterministic and independent of the worker count") {
  ExperimentConfig c = tiny_bec();
  const std::string a = csv_of(c);
  c.workers = 3;
  CHECK(csv_of(c) == a);
  c.seed = 2;
  CHECK(csv_of(c) != a);

  ExperimentConfig q = tiny_qd();
  const std::string qa = csv_of(q);
  q.workers = 2;
  CHECK(csv_of(q) == qa);
}

TEST_CASE("omega scan emits one point per offset") {
  ExperimentConfig c = tiny_bec();
  c.mode = "omega_scan";
  c.protocols = {"fe", "uni"};
  c.scan_min = -1.0;
  c.scan_max = 1.0;
  c.scan_step = 0.5;
  const ExperimentResult r = run_experiment(c);
  CHECK(r.points.size() == 6);
  CHECK(r.points[3].omega == doctest::Approx(magic_omega(0.05)));
}

TEST_CASE("budget scan") {
  ExperimentConfig c = tiny_qd();
  c.mode = "budget_scan";
  c.bath_samples = 1;
  c.protocols = {"uni", "qdd:n=3"};
  c.budget_pulses = 20;
  c.budget_times = {0.5, 1.0};
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[0].times == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(r.points[0].metric("fidelity").worst[0] == doctest::Approx(1.0));
}

TEST_CASE("resource guard") {
  ExperimentConfig c = tiny_qd();
  c.grid.nx = 5;
  c.grid.ny = 4;
  CHECK_THROWS_AS(c.validate(), ResourceError);
}
