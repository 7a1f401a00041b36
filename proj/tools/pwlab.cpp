// pwlab <command> <config.json> [--out DIR] [--dt X] [--modes N]
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pwlab/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Potential-well lab for the damped focusing cubic Klein-Gordon equation"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = ".";
  double dt = 0.0;
  int modes = 0;

  const char* commands[][2] = {
      {"ground-state", "solve for Q, cross-check it and certify the level d"},
      {"evolve", "integrate one trajectory and check the energy ledger"},
      {"dichotomy", "sweep lambda Q data over damping levels"},
      {"stabilize", "decay, equilibrium, Lyapunov and observability diagnostics"},
      {"blowup", "blow-up runs with coercivity bounds and virial checks"},
      {"check", "static checks of the ground state and the initial data"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--dt", dt, "override the time step")->check(CLI::PositiveNumber);
    sub->add_option("--modes", modes, "override the number of sine modes")->check(CLI::Range(8, 1 << 16));
  }
  CLI11_PARSE(app, argc, argv);

  const auto cmd = pwlab::parse_command(app.get_subcommands().front()->get_name());
  pwlab::ScenarioConfig cfg;
  try {
    cfg = pwlab::load_config(config_path);
  } catch (const pwlab::Error& e) {
    std::cerr << "pwlab: " << e.what() << "\n";
    return 2;
  }
  if (dt > 0.0) cfg.dt = dt;
  if (modes > 0) cfg.domain.n_modes = modes;

  const auto report = pwlab::run_scenario(cfg, *cmd, out_dir);
  for (const auto& v : report.verdicts) std::cout << "  " << v << "\n";
  for (const auto& c : report.checks)
    std::printf("%s %-48s value=%-14.6g tol=%.3g\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.value, c.tolerance);
  if (!report.error.empty()) std::cout << "ERROR " << report.error << "\n";
  std::printf("%s: %s (%.2f s), report in %s\n", pwlab::to_string(*cmd).c_str(),
              report.all_passed() ? "all checks passed" : "some checks failed", report.wall_time,
              (std::filesystem::path(out_dir) / "report.json").string().c_str());
  return report.all_passed() ? 0 : 1;
}
