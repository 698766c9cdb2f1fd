// Final gate over the full verification protocol. Each criterion prints one
// [PASS]/[FAIL] line; every tolerance and budget is pinned right here. The
// process exits nonzero if any line fails.

#include <hdgns/studies.hpp>

#include "../support/dense_oracle.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

using namespace hdgns;

namespace {

// pinned windows and budgets
constexpr double kRateE1Lo = 0.8, kRateE1Hi = 1.3;    // k=1 energy rate
constexpr double kRateU1Lo = 1.7, kRateU1Hi = 2.5;    // k=1 L2 velocity rate
constexpr double kRateP1Lo = 0.8, kRateP1Hi = 1.4;    // k=1 L2 pressure rate
constexpr double kRateE2Lo = 1.8, kRateE2Hi = 2.5;    // k=2
constexpr double kRateU2Lo = 2.6, kRateU2Hi = 3.3;
constexpr double kRateP2Lo = 1.8, kRateP2Hi = 2.4;
constexpr double kRateTLo = 0.8, kRateTHi = 1.2;      // temporal, all norms
constexpr double kBudgetC1 = 600.0, kBudgetC2 = 900.0, kBudgetC4 = 1800.0;
constexpr double kViscRatioCap = 2.0;                 // mu sweep energy spread
constexpr double kMagnitudeRef = 4.8e-01;             // coarsest-level energy error
constexpr double kMagnitudeFactor = 5.0;
constexpr double kConservationTol = 1e-9;
constexpr double kFluxTol = 1e-9;
constexpr double kOracleTol = 1e-11;                  // sparse vs dense, relative
constexpr double kInfsupDriftCap = 0.20;
constexpr double kPatchTol = 1e-9;

struct Gate {
  int passed = 0, failed = 0;

  void line(const std::string& id, bool ok, const std::string& detail) {
    std::printf("[%s] %-3s %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    (ok ? passed : failed) += 1;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

RunConfig spatial_config(int k, double mu, std::vector<int> levels, double T) {
  RunConfig rc;
  rc.command = "spatial_study";
  rc.k = k;
  rc.mu = mu;
  rc.levels = std::move(levels);
  rc.T = T;
  rc.dt_coef = 0.8;
  rc.dt_power = k + 1;
  return rc;
}

double worst_of(const StudyResult& res) {
  double w = 0;
  for (const auto& r : res.rows) w = std::max(w, r.worst_conservation);
  return w;
}

bool in_window(double x, double lo, double hi) { return x >= lo && x <= hi; }

}  // namespace

int main() {
  Gate gate;
  std::filesystem::create_directories("acceptance_out");
  double worst_cons_all = 0;  // fed by every transient run below

  // C1: spatial convergence at k=1, mu=1e-1, four levels
  StudyResult c1;
  {
    auto t0 = std::chrono::steady_clock::now();
    c1 = spatial_study_run(spatial_config(1, 1e-1, {4, 8, 16, 32}, 0.1));
    double wall = seconds_since(t0);
    write_study_csv("acceptance_out/spatial_k1_mu1e-1.csv", c1, false);
    worst_cons_all = std::max(worst_cons_all, worst_of(c1));
    double rE = c1.rate_uE.back(), rU = c1.rate_uL2.back(), rP = c1.rate_p.back();
    bool ok = in_window(rE, kRateE1Lo, kRateE1Hi) && in_window(rU, kRateU1Lo, kRateU1Hi) &&
              in_window(rP, kRateP1Lo, kRateP1Hi) && wall <= kBudgetC1;
    gate.line("C1", ok,
              fmt("spatial k=1 mu=1e-1: rate_E=%.2f in [%.1f,%.1f], rate_uL2=%.2f in "
                  "[%.1f,%.1f], rate_p=%.2f in [%.1f,%.1f], wall=%.0fs<=%.0fs",
                  rE, kRateE1Lo, kRateE1Hi, rU, kRateU1Lo, kRateU1Hi, rP, kRateP1Lo,
                  kRateP1Hi, wall, kBudgetC1));

    double coarse = c1.rows.front().err.u_energy;
    bool mag = coarse <= kMagnitudeFactor * kMagnitudeRef &&
               coarse >= kMagnitudeRef / kMagnitudeFactor;
    gate.line("T1", mag,
              fmt("coarsest-level energy error %.3e within factor %.0f of %.1e", coarse,
                  kMagnitudeFactor, kMagnitudeRef));
  }

  // C2: spatial convergence at k=2, mu=1e-3, three levels
  {
    auto t0 = std::chrono::steady_clock::now();
    StudyResult c2 = spatial_study_run(spatial_config(2, 1e-3, {4, 8, 16}, 0.1));
    double wall = seconds_since(t0);
    write_study_csv("acceptance_out/spatial_k2_mu1e-3.csv", c2, false);
    worst_cons_all = std::max(worst_cons_all, worst_of(c2));
    double rE = c2.rate_uE.back(), rU = c2.rate_uL2.back(), rP = c2.rate_p.back();
    bool ok = in_window(rE, kRateE2Lo, kRateE2Hi) && in_window(rU, kRateU2Lo, kRateU2Hi) &&
              in_window(rP, kRateP2Lo, kRateP2Hi) && wall <= kBudgetC2;
    gate.line("C2", ok,
              fmt("spatial k=2 mu=1e-3: rate_E=%.2f in [%.1f,%.1f], rate_uL2=%.2f in "
                  "[%.1f,%.1f], rate_p=%.2f in [%.1f,%.1f], wall=%.0fs<=%.0fs",
                  rE, kRateE2Lo, kRateE2Hi, rU, kRateU2Lo, kRateU2Hi, rP, kRateP2Lo,
                  kRateP2Hi, wall, kBudgetC2));
  }

  // C3: small-viscosity robustness, k=1, mu=1e-5 vs mu=1e-3
  {
    bool completed = true;
    std::string note;
    double ratio = 0;
    try {
      StudyResult lo = spatial_study_run(spatial_config(1, 1e-5, {4, 8, 16, 32}, 0.1));
      StudyResult mid = spatial_study_run(spatial_config(1, 1e-3, {4, 8, 16, 32}, 0.1));
      write_study_csv("acceptance_out/spatial_k1_mu1e-5.csv", lo, false);
      write_study_csv("acceptance_out/spatial_k1_mu1e-3.csv", mid, false);
      worst_cons_all = std::max({worst_cons_all, worst_of(lo), worst_of(mid)});
      double eLo = lo.rows.back().err.u_energy, eMid = mid.rows.back().err.u_energy;
      ratio = std::max(eLo / eMid, eMid / eLo);
      note = fmt("mu sweep k=1: finest e_u_E %.3e (mu=1e-5) vs %.3e (mu=1e-3), "
                 "spread %.2fx < %.0fx",
                 eLo, eMid, ratio, kViscRatioCap);
    } catch (const std::exception& e) {
      completed = false;
      note = fmt("solver failure at mu=1e-5: %s", e.what());
    }
    gate.line("C3", completed && ratio < kViscRatioCap, note);
  }

  // C4: temporal convergence, k=2 on a >=2000-cell mesh, every pairwise rate
  {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig rc;
    rc.command = "temporal_study";
    rc.k = 2;
    rc.mu = 1e-3;
    rc.levels = {16};
    rc.T = 1.0;
    rc.dts = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
    StudyResult c4 = temporal_study_run(rc);
    double wall = seconds_since(t0);
    write_study_csv("acceptance_out/temporal_k2.csv", c4, true);
    worst_cons_all = std::max(worst_cons_all, worst_of(c4));
    bool ok = c4.rows.front().cells >= 2000 && wall <= kBudgetC4;
    double rmin = 1e300, rmax = -1e300;
    for (const auto& rates : {c4.rate_uE, c4.rate_uL2, c4.rate_p})
      for (double r : rates) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        ok = ok && in_window(r, kRateTLo, kRateTHi);
      }
    gate.line("C4", ok,
              fmt("temporal k=2 on %d cells: all 9 rates in [%.1f,%.1f] (span "
                  "%.2f..%.2f), wall=%.0fs<=%.0fs",
                  c4.rows.front().cells, kRateTLo, kRateTHi, rmin, rmax, wall,
                  kBudgetC4));
  }

  // C5: conservation after every step of every run above, plus flux balance on
  // a source-free subsurface run
  {
    RunConfig rc;
    rc.command = "subsurface";
    rc.mu = 1.0;
    rc.alpha = 0.5;
    rc.kappa_random = true;
    rc.kappa_seed = 7;
    rc.levels = {4};
    rc.T = 0.5;
    rc.n_steps = 50;
    rc.vtk_every = 0;
    SubsurfaceOutcome sub = subsurface_run(rc, "acceptance_out");
    worst_cons_all = std::max(worst_cons_all, sub.worst_conservation);
    bool ok = worst_cons_all <= kConservationTol && sub.worst_imbalance <= kFluxTol;
    gate.line("C5", ok,
              fmt("conservation across all runs %.2e <= %.0e, source-free flux "
                  "imbalance %.2e <= %.0e",
                  worst_cons_all, kConservationTol, sub.worst_imbalance, kFluxTol));
  }

  // C6: residual of the interpolated exact solution shrinks monotonically
  {
    Scenario sc = manufactured_scenario(1e-3);
    StepConfig cfg;
    cfg.with_convection = false;
    cfg.with_time_derivative = false;
    std::vector<double> rnorm;
    for (int ny : {1, 2, 4}) {
      Mesh mesh = build_structured(sc.domain, ny);
      PhysParams params = sc.make_params(mesh);
      DofSystem dofs = build_dofs(mesh, 1, sc.mode);
      FormContext ctx(mesh, dofs, params);
      Eigen::VectorXd xstar = testsupport::interpolate_exact(mesh, dofs, sc.exact, 0.0);
      Eigen::VectorXd w = Eigen::VectorXd::Zero(dofs.n_dofs);
      Eigen::MatrixXd A = testsupport::dense_operator(ctx, w, cfg);
      Eigen::VectorXd r = A * xstar - assemble_rhs(ctx, sc.data_stationary, 0.0, cfg);
      double acc = 0;
      for (int i = 0; i < dofs.n_dofs; ++i)
        if (dofs.free_index[i] >= 0) acc += r(i) * r(i);
      rnorm.push_back(std::sqrt(acc));
    }
    bool ok = rnorm[1] < rnorm[0] && rnorm[2] < rnorm[1];
    gate.line("C6", ok,
              fmt("consistency residual decreases: %.3e -> %.3e -> %.3e", rnorm[0],
                  rnorm[1], rnorm[2]));
  }

  // C7: sparse assembly matches the dense brute-force oracle entrywise
  {
    Scenario sc = manufactured_scenario(1e-3);
    Mesh mesh = build_structured(sc.domain, 1);
    PhysParams params = sc.make_params(mesh);
    DofSystem dofs = build_dofs(mesh, 1, sc.mode);
    FormContext ctx(mesh, dofs, params);
    double t = 0.3;
    StepConfig cfg;
    cfg.dt = 0.05;
    Eigen::VectorXd w = testsupport::interpolate_exact(mesh, dofs, sc.exact, t);
    Eigen::VectorXd cvals =
        constrained_values(mesh, dofs, sc.data.dirichlet_us, sc.data.darcy_pd, t);
    auto trips = operator_triplets(ctx, w, cfg);
    ReducedSystem sys = reduce_system(dofs, trips, cvals);
    Eigen::VectorXd rhs_full = assemble_rhs(ctx, sc.data, t, cfg, &w);
    Eigen::VectorXd rhs = reduce_rhs(dofs, rhs_full, sys);
    Eigen::MatrixXd Ad = testsupport::dense_operator(ctx, w, cfg);
    testsupport::DenseReduced dr = testsupport::dense_reduce(dofs, Ad, rhs_full, cvals);
    double scale = dr.A.cwiseAbs().maxCoeff();
    double dA = (Eigen::MatrixXd(sys.A) - dr.A).cwiseAbs().maxCoeff() / scale;
    double db = (rhs - dr.b).cwiseAbs().maxCoeff() /
                std::max(1.0, dr.b.cwiseAbs().maxCoeff());
    bool ok = dA < kOracleTol && db < kOracleTol;
    gate.line("C7", ok,
              fmt("sparse vs dense on %d cells: matrix %.2e, rhs %.2e, tol %.0e",
                  mesh.n_cells(), dA, db, kOracleTol));
  }

  // C8: inf-sup floor positive and mesh-stable
  {
    bool ok = true;
    std::string note = "infsup";
    Scenario sc = manufactured_scenario(1e-3);
    for (int k : {1, 2}) {
      double sig[2];
      int slot = 0;
      for (int ny : {2, 4}) {
        Mesh mesh = build_structured(sc.domain, ny);
        PhysParams params = sc.make_params(mesh);
        DofSystem dofs = build_dofs(mesh, k, sc.mode);
        FormContext ctx(mesh, dofs, params);
        sig[slot++] = infsup_probe(ctx);
      }
      double drift = std::abs(sig[1] - sig[0]) / sig[0];
      ok = ok && sig[0] > 0 && sig[1] > 0 && drift < kInfsupDriftCap;
      note += fmt(" k=%d: %.3e -> %.3e (drift %.1f%%)", k, sig[0], sig[1], 100 * drift);
    }
    gate.line("C8", ok, note + fmt(", cap %.0f%%", 100 * kInfsupDriftCap));
  }

  // C9: coercive symmetric part on free DOFs at the default penalty
  {
    bool ok = true;
    double worst = 1e300;
    Scenario sc = manufactured_scenario(1e-3);
    for (int k : {1, 2})
      for (int ny : {1, 2, 4}) {
        Mesh mesh = build_structured(sc.domain, ny);
        PhysParams params = sc.make_params(mesh);
        DofSystem dofs = build_dofs(mesh, k, sc.mode);
        FormContext ctx(mesh, dofs, params);
        double lam = coercivity_probe(ctx);
        worst = std::min(worst, lam);
        ok = ok && lam > 0;
      }
    gate.line("C9", ok,
              fmt("smallest symmetric-part eigenvalue over k in {1,2}, ny in {1,2,4}: "
                  "%.3e > 0",
                  worst));
  }

  // C10: stationary polynomial exact solutions reproduced to solver precision
  {
    bool ok = true;
    double worst = 0;
    for (int k : {1, 2}) {
      Scenario sc = patch_scenario(k);
      Mesh mesh = build_structured(sc.domain, 2);
      FlowSolver solver(mesh, sc, k);
      State s = solver.solve_stationary(0.0);
      ErrorReport er = compute_errors(solver.ctx(), sc.exact, s.x, s.t);
      double m = std::max({er.u_energy, er.u_l2, er.p_l2});
      worst = std::max(worst, m);
      ok = ok && m <= kPatchTol;
    }
    gate.line("C10", ok,
              fmt("polynomial patch k in {1,2}: worst norm error %.2e <= %.0e", worst,
                  kPatchTol));
  }

  std::printf("summary: %d passed, %d failed\n", gate.passed, gate.failed);
  return gate.failed == 0 ? 0 : 1;
}
