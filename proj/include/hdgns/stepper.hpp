#pragma once

// Driver for the stationary solve and the backward Euler time loop. The
// transport field is lagged (previous step velocity), so every step is one
// linear solve. The sparsity pattern is shared between the stationary and
// transient operators, hence the symbolic factorization is done once.

#include <functional>
#include <memory>

#include "hdgns/condensed.hpp"
#include "hdgns/diagnostics.hpp"
#include "hdgns/scenarios.hpp"
#include "hdgns/solver.hpp"
#include "hdgns/spaces.hpp"

namespace hdgns {

class FlowSolver {
 public:
  // condensed: eliminate cell unknowns per element and solve the trace system
  // (the fast path); the monolithic solve is kept as the reference
  FlowSolver(const Mesh& mesh, const Scenario& sc, int k, bool condensed = true)
      : mesh_(mesh),
        sc_(sc),
        dofs_(build_dofs(mesh, k, sc.mode)),
        params_(sc.make_params(mesh)),
        ctx_(mesh, dofs_, params_),
        condensed_(condensed ? std::make_unique<CondensedSolver>(ctx_) : nullptr) {}

  const DofSystem& dofs() const { return dofs_; }
  const FormContext& ctx() const { return ctx_; }
  const Scenario& scenario() const { return sc_; }

  // stationary operator: no time derivative and no transport term; the data
  // loses its time-derivative and convective parts accordingly
  State solve_stationary(double t) {
    StepConfig cfg;
    cfg.with_convection = false;
    cfg.with_time_derivative = false;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dofs_.n_dofs);
    State s;
    s.t = t;
    s.x = linear_solve(w, cfg, sc_.data_stationary, t, nullptr);
    return s;
  }

  // one backward Euler step from s to time s.t + dt
  State advance(const State& s, double dt) {
    StepConfig cfg;
    cfg.with_convection = sc_.with_convection;
    cfg.with_time_derivative = true;
    cfg.dt = dt;
    double t1 = s.t + dt;
    Eigen::VectorXd w = sc_.with_convection
                            ? s.x
                            : Eigen::VectorXd::Zero(dofs_.n_dofs).eval();
    State out;
    out.t = t1;
    out.x = linear_solve(w, cfg, sc_.data, t1, &s.x);
    return out;
  }

  // initial state: explicit field if the scenario has one, else the
  // stationary solution at t0
  State initial_state(double t0) {
    if (sc_.initial_us) {
      State s;
      s.t = t0;
      s.x = Eigen::VectorXd::Zero(dofs_.n_dofs);
      auto zero = [](const Eigen::Vector2d&) { return Eigen::Vector2d(0, 0); };
      auto u0 = sc_.initial_us;
      bdm_interpolate(
          mesh_, dofs_, [u0](const Eigen::Vector2d& x) { return u0(x); }, zero, s.x);
      return s;
    }
    return solve_stationary(t0);
  }

  ConservationReport check_state(const State& s) const {
    return check_conservation(ctx_, sc_.data, s.x, s.t);
  }

  struct RunResult {
    State state;
    double worst_conservation = 0;
    int steps_done = 0;
  };

  // backward Euler loop with a conservation check after every step
  RunResult run(double t0, double dt, int nsteps,
                const std::function<void(int, const State&, const ConservationReport&)>&
                    on_step = nullptr) {
    RunResult res;
    res.state = initial_state(t0);
    for (int n = 0; n < nsteps; ++n) {
      res.state = advance(res.state, dt);
      ConservationReport rep = check_state(res.state);
      res.worst_conservation = std::max(res.worst_conservation, rep.worst());
      ++res.steps_done;
      if (on_step) on_step(n + 1, res.state, rep);
    }
    return res;
  }

 private:
  Eigen::VectorXd constraint_values(double t) const {
    return constrained_values(mesh_, dofs_, sc_.data.dirichlet_us, sc_.data.darcy_pd, t);
  }

  Eigen::VectorXd linear_solve(const Eigen::VectorXd& w, const StepConfig& cfg,
                               const ProblemData& data, double t,
                               const Eigen::VectorXd* u_old) {
    Eigen::VectorXd cvals = constraint_values(t);
    if (condensed_) return condensed_->step(w, cfg, data, t, u_old, cvals);
    auto trips = operator_triplets(ctx_, w, cfg);
    ReducedSystem sys = reduce_system(dofs_, trips, cvals);
    Eigen::VectorXd rhs = reduce_rhs(dofs_, assemble_rhs(ctx_, data, t, cfg, u_old), sys);
    if (!analyzed_) {
      solver_.analyze(sys.A);
      analyzed_ = true;
    }
    solver_.factorize(sys.A);
    return expand_solution(dofs_, solver_.solve(sys.A, rhs), cvals);
  }

  const Mesh& mesh_;
  Scenario sc_;
  DofSystem dofs_;
  PhysParams params_;
  FormContext ctx_;
  LinearSolver solver_;
  std::unique_ptr<CondensedSolver> condensed_;
  bool analyzed_ = false;
};

}  // namespace hdgns
