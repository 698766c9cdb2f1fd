#pragma once

// Drivers behind the CLI commands: convergence tables (spatial and temporal),
// the per-step invariant sweep, the heterogeneous subsurface run with VTK
// snapshots, and the stability probes. Each driver writes CSV output plus a
// machine-readable manifest into the configured directory.

#include "hdgns/config.hpp"
#include "hdgns/diagnostics.hpp"
#include "hdgns/probes.hpp"
#include "hdgns/scenarios.hpp"
#include "hdgns/stepper.hpp"
#include "hdgns/vtk.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace hdgns {

// every threshold the CLI gates on
inline constexpr double kInvariantTol = 1e-9;

// CSV number format: scientific, 4 significant digits, '.' separator
inline std::string sci4(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

inline Scenario scenario_for(const RunConfig& rc) {
  if (rc.command == "subsurface") {
    Scenario sc = subsurface_scenario(rc.kappa_seed, rc.polyline);
    sc.mu = rc.mu;
    sc.alpha = rc.alpha;
    sc.beta = rc.beta;
    if (!rc.kappa_random) {
      double kap = rc.kappa;
      sc.make_kappa = [kap](const Mesh& m) {
        return std::vector<double>(m.n_cells(), kap);
      };
    }
    return sc;
  }
  if (rc.kappa_random)
    throw ConfigError("kappa = random(<seed>) needs command = subsurface");
  Scenario sc = manufactured_scenario(rc.mu, rc.kappa, rc.alpha);
  sc.beta = rc.beta;
  return sc;
}

struct TimeGrid {
  double dt = 0;
  int n = 0;
};

// explicit n_steps wins; otherwise the dt rule, snapped so n * dt == T
inline TimeGrid time_grid_for(const RunConfig& rc, double h) {
  if (rc.n_steps > 0) return {rc.T / rc.n_steps, rc.n_steps};
  double dt0 = rc.dt_coef * std::pow(h, rc.dt_power);
  int n = std::max(1, static_cast<int>(std::ceil(rc.T / dt0 - 1e-12)));
  return {rc.T / n, n};
}

struct StudyRow {
  int cells = 0;
  double h = 0;
  double dt = 0;
  ErrorReport err;
  double worst_conservation = 0;  // max over all steps of the run
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<double> rate_uE, rate_uL2, rate_p;  // between consecutive rows
};

inline void attach_rates(StudyResult& res, const std::vector<double>& hs) {
  if (res.rows.size() < 2) return;
  std::vector<double> eE, eL, eP;
  for (const auto& r : res.rows) {
    eE.push_back(r.err.u_energy);
    eL.push_back(r.err.u_l2);
    eP.push_back(r.err.p_l2);
  }
  res.rate_uE = convergence_rates(eE, hs);
  res.rate_uL2 = convergence_rates(eL, hs);
  res.rate_p = convergence_rates(eP, hs);
}

inline StudyResult spatial_study_run(const RunConfig& rc, std::ostream* log = nullptr) {
  Scenario sc = scenario_for(rc);
  StudyResult res;
  std::vector<double> hs;
  for (int ny : rc.levels) {
    Mesh mesh = build_structured(sc.domain, ny);
    FlowSolver solver(mesh, sc, rc.k);
    TimeGrid g = time_grid_for(rc, mesh.h_max);
    auto out = solver.run(0.0, g.dt, g.n);
    StudyRow row;
    row.cells = mesh.n_cells();
    row.h = mesh.h_max;
    row.dt = g.dt;
    row.err = compute_errors(solver.ctx(), sc.exact, out.state.x, out.state.t);
    row.worst_conservation = out.worst_conservation;
    if (log)
      *log << "ny=" << ny << " cells=" << row.cells << " steps=" << g.n
           << " e_u_E=" << sci4(row.err.u_energy) << " e_u_L2=" << sci4(row.err.u_l2)
           << " e_p_L2=" << sci4(row.err.p_l2)
           << " conservation=" << sci4(out.worst_conservation) << "\n";
    res.rows.push_back(row);
    hs.push_back(mesh.h_max);
  }
  attach_rates(res, hs);
  return res;
}

inline StudyResult temporal_study_run(const RunConfig& rc, std::ostream* log = nullptr) {
  if (rc.dts.empty())
    throw ConfigError("temporal_study needs a time.dts list");
  Scenario sc = scenario_for(rc);
  Mesh mesh = build_structured(sc.domain, rc.levels.back());
  StudyResult res;
  for (double dt : rc.dts) {
    int n = static_cast<int>(std::llround(rc.T / dt));
    if (n < 1 || std::abs(n * dt - rc.T) > 1e-9 * rc.T)
      throw ConfigError("every entry of time.dts must divide T");
    FlowSolver solver(mesh, sc, rc.k);
    auto out = solver.run(0.0, dt, n);
    StudyRow row;
    row.cells = mesh.n_cells();
    row.h = mesh.h_max;
    row.dt = dt;
    row.err = compute_errors(solver.ctx(), sc.exact, out.state.x, out.state.t);
    row.worst_conservation = out.worst_conservation;
    if (log)
      *log << "dt=" << sci4(dt) << " steps=" << n << " e_u_E=" << sci4(row.err.u_energy)
           << " e_u_L2=" << sci4(row.err.u_l2) << " e_p_L2=" << sci4(row.err.p_l2)
           << "\n";
    res.rows.push_back(row);
  }
  attach_rates(res, rc.dts);
  return res;
}

inline void write_study_csv(const std::string& path, const StudyResult& res,
                            bool temporal) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << (temporal ? "dt" : "cells,h")
      << ",e_u_E,rate_u_E,e_u_L2,rate_u_L2,e_p_L2,rate_p_L2\n";
  for (size_t i = 0; i < res.rows.size(); ++i) {
    const StudyRow& r = res.rows[i];
    std::string rE = i == 0 ? "" : sci4(res.rate_uE[i - 1]);
    std::string rL = i == 0 ? "" : sci4(res.rate_uL2[i - 1]);
    std::string rP = i == 0 ? "" : sci4(res.rate_p[i - 1]);
    if (temporal)
      out << sci4(r.dt);
    else
      out << r.cells << "," << sci4(r.h);
    out << "," << sci4(r.err.u_energy) << "," << rE << "," << sci4(r.err.u_l2) << ","
        << rL << "," << sci4(r.err.p_l2) << "," << rP << "\n";
  }
}

struct InvariantsOutcome {
  double worst = 0;
  bool pass = true;
};

inline InvariantsOutcome invariants_run(const RunConfig& rc, const std::string& csv_path,
                                        std::ostream* log = nullptr) {
  Scenario sc = scenario_for(rc);
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open '" + csv_path + "' for writing");
  csv << "ny,step,t,div_s,div_d,normal_jump,interface_match,boundary_normal,worst\n";
  InvariantsOutcome out;
  for (int ny : rc.levels) {
    Mesh mesh = build_structured(sc.domain, ny);
    FlowSolver solver(mesh, sc, rc.k);
    TimeGrid g = time_grid_for(rc, mesh.h_max);
    auto emit = [&](int step, const State& s, const ConservationReport& rep) {
      csv << ny << "," << step << "," << sci4(s.t) << "," << sci4(rep.div_s) << ","
          << sci4(rep.div_d) << "," << sci4(rep.normal_jump) << ","
          << sci4(rep.interface_match) << "," << sci4(rep.boundary_normal) << ","
          << sci4(rep.worst()) << "\n";
    };
    auto res = solver.run(0.0, g.dt, g.n, emit);
    out.worst = std::max(out.worst, res.worst_conservation);
    if (log)
      *log << "ny=" << ny << " steps=" << g.n
           << " worst=" << sci4(res.worst_conservation) << "\n";
  }
  out.pass = out.worst <= kInvariantTol;
  return out;
}

struct SubsurfaceOutcome {
  double worst_imbalance = 0;
  double worst_conservation = 0;
  int snapshots = 0;
  bool pass = true;
};

inline SubsurfaceOutcome subsurface_run(const RunConfig& rc, const std::string& out_dir,
                                        std::ostream* log = nullptr) {
  Scenario sc = scenario_for(rc);
  Mesh mesh = build_structured(sc.domain, rc.levels.back());
  FlowSolver solver(mesh, sc, rc.k);
  TimeGrid g = time_grid_for(rc, mesh.h_max);

  std::ofstream csv(out_dir + "/mass_balance.csv");
  if (!csv) throw std::runtime_error("cannot open mass_balance.csv for writing");
  csv << "step,t,interface_influx,porous_outflux,imbalance,worst_conservation\n";

  SubsurfaceOutcome out;
  auto snapshot_path = [&](int step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "/fields_%06d.vtk", step);
    return out_dir + buf;
  };
  auto on_step = [&](int step, const State& s, const ConservationReport& rep) {
    FluxBalance fb = interface_flux_balance(solver.ctx(), s.x);
    csv << step << "," << sci4(s.t) << "," << sci4(fb.interface_influx) << ","
        << sci4(fb.porous_outflux) << "," << sci4(fb.imbalance()) << ","
        << sci4(rep.worst()) << "\n";
    out.worst_imbalance = std::max(out.worst_imbalance, fb.imbalance());
    out.worst_conservation = std::max(out.worst_conservation, rep.worst());
    if (rc.vtk_every > 0 && step % rc.vtk_every == 0) {
      write_vtk_snapshot(snapshot_path(step), solver.ctx(), s.x, s.t);
      ++out.snapshots;
    }
    if (log && (step == g.n || (rc.vtk_every > 0 && step % rc.vtk_every == 0)))
      *log << "step " << step << "/" << g.n << " t=" << sci4(s.t)
           << " imbalance=" << sci4(fb.imbalance()) << "\n";
  };

  State s0 = solver.initial_state(0.0);
  if (rc.vtk_every > 0) {
    write_vtk_snapshot(snapshot_path(0), solver.ctx(), s0.x, s0.t);
    ++out.snapshots;
  }
  State s = s0;
  for (int n = 1; n <= g.n; ++n) {
    s = solver.advance(s, g.dt);
    on_step(n, s, solver.check_state(s));
  }
  out.pass = out.worst_imbalance <= kInvariantTol && out.worst_conservation <= kInvariantTol;
  return out;
}

struct ProbeOutcome {
  bool pass = true;
};

inline ProbeOutcome probe_run(const RunConfig& rc, const std::string& csv_path,
                              std::ostream* log = nullptr) {
  Scenario sc = scenario_for(rc);
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open '" + csv_path + "' for writing");
  csv << "ny,cells,infsup,coercivity,poincare\n";
  ProbeOutcome out;
  for (int ny : rc.levels) {
    Mesh mesh = build_structured(sc.domain, ny);
    if (mesh.n_cells() > kProbeCellCap)
      throw ConfigError("probe levels must stay at or below " +
                        std::to_string(kProbeCellCap) + " cells");
    FlowSolver solver(mesh, sc, rc.k, /*condensed=*/false);
    double is = infsup_probe(solver.ctx());
    double co = coercivity_probe(solver.ctx());
    double po = poincare_probe(solver.ctx());
    csv << ny << "," << mesh.n_cells() << "," << sci4(is) << "," << sci4(co) << ","
        << sci4(po) << "\n";
    if (log)
      *log << "ny=" << ny << " infsup=" << sci4(is) << " coercivity=" << sci4(co)
           << " poincare=" << sci4(po) << "\n";
    bool ok = std::isfinite(is) && std::isfinite(co) && std::isfinite(po) && is > 0 &&
              co > 0 && po > 0;
    out.pass = out.pass && ok;
  }
  return out;
}

// ---- command orchestration -----------------------------------------------

struct CommandResult {
  int exit_code = 0;  // 0 ok, 3 threshold violation
  std::vector<std::string> outputs;
  std::vector<int> mesh_cells;
  std::string message;
};

inline void write_manifest(const std::string& dir, const RunConfig& rc,
                           const CommandResult& res, double wall_s) {
  nlohmann::json m;
  m["command"] = rc.command;
  m["config_hash"] = config_hash(rc);
  m["k"] = rc.k;
  m["mesh_cells"] = res.mesh_cells;
  m["wall_time_s"] = wall_s;
  m["outputs"] = res.outputs;
  m["exit_code"] = res.exit_code;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot open manifest.json for writing");
  out << m.dump(2) << "\n";
}

inline CommandResult run_command(const RunConfig& rc, std::ostream* log = nullptr) {
  auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(rc.out_dir);
  CommandResult res;
  {
    Scenario sc = scenario_for(rc);
    for (int ny : rc.levels)
      res.mesh_cells.push_back(build_structured(sc.domain, ny).n_cells());
  }

  if (rc.command == "spatial_study") {
    StudyResult sr = spatial_study_run(rc, log);
    std::string path = rc.out_dir + "/spatial.csv";
    write_study_csv(path, sr, /*temporal=*/false);
    res.outputs.push_back(path);
  } else if (rc.command == "temporal_study") {
    StudyResult sr = temporal_study_run(rc, log);
    std::string path = rc.out_dir + "/temporal.csv";
    write_study_csv(path, sr, /*temporal=*/true);
    res.outputs.push_back(path);
  } else if (rc.command == "invariants") {
    std::string path = rc.out_dir + "/invariants.csv";
    InvariantsOutcome io = invariants_run(rc, path, log);
    res.outputs.push_back(path);
    if (!io.pass) {
      res.exit_code = 3;
      res.message = "conservation residual " + sci4(io.worst) + " exceeds " +
                    sci4(kInvariantTol);
    }
  } else if (rc.command == "subsurface") {
    SubsurfaceOutcome so = subsurface_run(rc, rc.out_dir, log);
    res.outputs.push_back(rc.out_dir + "/mass_balance.csv");
    if (so.snapshots > 0)
      res.outputs.push_back(rc.out_dir + "/fields_*.vtk (" +
                            std::to_string(so.snapshots) + " files)");
    if (!so.pass) {
      res.exit_code = 3;
      res.message = "mass balance violated: imbalance " + sci4(so.worst_imbalance) +
                    ", conservation " + sci4(so.worst_conservation);
    }
  } else if (rc.command == "probe") {
    std::string path = rc.out_dir + "/probes.csv";
    ProbeOutcome po = probe_run(rc, path, log);
    res.outputs.push_back(path);
    if (!po.pass) {
      res.exit_code = 3;
      res.message = "a stability probe came out nonpositive or nonfinite";
    }
  } else {
    throw ConfigError("unknown command '" + rc.command + "'");
  }

  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(rc.out_dir, rc, res, wall);
  res.outputs.push_back(rc.out_dir + "/manifest.json");
  return res;
}

}  // namespace hdgns
