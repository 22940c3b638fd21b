#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ddsim/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
            std::optional<int> workers, std::string out) {
  ddsim::ExperimentConfig cfg = ddsim::load_config(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    ddsim::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  if (out.empty()) out = cfg.out;
  cfg.validate();

  const ddsim::ExperimentResult result = ddsim::run_experiment(cfg);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

  if (out.empty() || out == "-") {
    ddsim::write_csv(std::cout, result);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    ddsim::write_csv(f, result);
  }
  for (const auto& pt : result.points) {
    for (const auto& [key, ct] : pt.characteristic) {
      char buf[200];
      if (ct.reached())
        std::snprintf(buf, sizeof buf, "%s %-22s omega=%-10.4f %s = %.4g\n", pt.id.c_str(), pt.protocol.token.c_str(),
                      pt.omega, key.c_str(), *ct.value);
      else
        std::snprintf(buf, sizeof buf, "%s %-22s omega=%-10.4f %s > %.4g\n", pt.id.c_str(), pt.protocol.token.c_str(),
                      pt.omega, key.c_str(), ct.horizon);
      std::cerr << buf;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddsim: dynamical decoupling simulations"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int workers = 0;
  auto* run = app.add_subcommand("run", "run an experiment described by a config file and write CSV");
  run->add_option("--config,-c", config_path, "config file (key = value lines)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
  auto* workers_opt = run->add_option("--workers,-j", workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out,-o", out, "CSV output path ('-' for stdout)");
  run->add_option("--set", overrides, "override a config key, key=value (repeatable)");

  auto* presets = app.add_subcommand("presets", "list experiment presets, or print one as a config file");
  std::string preset_id;
  presets->add_option("id", preset_id, "preset to print");

  auto* verify = app.add_subcommand("verify", "check the effective-Hamiltonian suppression");
  std::string verify_csv;
  verify->add_option("--csv", verify_csv, "also write the suppression table as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::optional<std::uint64_t> s;
      std::optional<int> w;
      if (*seed_opt) s = seed;
      if (*workers_opt) w = workers;
      return cmd_run(config_path, overrides, s, w, out);
    }
    if (*presets) {
      if (preset_id.empty()) {
        for (const auto& id : ddsim::preset_ids()) std::printf("%-8s %s\n", id.c_str(), ddsim::preset_description(id).c_str());
      } else {
        const ddsim::ExperimentConfig cfg = ddsim::preset(preset_id);
        std::printf("# %s\n", ddsim::preset_description(preset_id).c_str());
        for (const auto& [k, v] : cfg.entries()) std::printf("%s = %s\n", k.c_str(), v.c_str());
      }
      return 0;
    }
    if (*verify) {
      std::ofstream csv;
      if (!verify_csv.empty()) {
        csv.open(verify_csv);
        if (!csv) throw std::runtime_error("cannot write '" + verify_csv + "'");
      }
      const bool ok = ddsim::run_verify(std::cout, verify_csv.empty() ? nullptr : &csv);
      return ok ? 0 : 1;
    }
  } catch (const ddsim::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
