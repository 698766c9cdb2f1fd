// hdg-nsdarcy <command> --config <path> [--out <dir>]
//
// Commands: spatial_study, temporal_study, invariants, subsurface, probe.
// Exit codes: 0 success, 1 config error, 2 solver failure, 3 a gated
// threshold was violated. HDGNS_NUM_THREADS caps the worker count.

#include <hdgns/studies.hpp>

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"coupled free-flow / porous-medium solver"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  const char* names[] = {"spatial_study", "temporal_study", "invariants",
                         "subsurface", "probe"};
  const char* blurbs[] = {"mesh refinement convergence table",
                          "time step refinement table on a fixed mesh",
                          "per-step conservation residual sweep",
                          "heterogeneous subsurface run with VTK snapshots",
                          "inf-sup, coercivity and Poincare probes"};
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], blurbs[i]);
    sub->add_option("--config", config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (const char* cap = std::getenv("HDGNS_NUM_THREADS")) {
    int n = std::atoi(cap);
    if (n > 0) Eigen::setNbThreads(n);
  }

  std::string cmd = app.get_subcommands().front()->get_name();
  hdgns::RunConfig rc;
  try {
    std::ifstream in(config_path);
    if (!in) throw hdgns::ConfigError("cannot read '" + config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    rc = hdgns::parse_run_config(ss.str());
    if (rc.command.empty())
      rc.command = cmd;
    else if (rc.command != cmd)
      throw hdgns::ConfigError("config is for command '" + rc.command +
                               "', invoked as '" + cmd + "'");
    if (!out_dir.empty()) rc.out_dir = out_dir;
  } catch (const hdgns::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    hdgns::CommandResult res = hdgns::run_command(rc, &std::cout);
    for (const auto& o : res.outputs) std::cout << "wrote " << o << "\n";
    if (res.exit_code != 0) std::cerr << "threshold violation: " << res.message << "\n";
    return res.exit_code;
  } catch (const hdgns::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  }
}
