#pragma once

// Static condensation of the cell unknowns. Every form couples a cell's
// velocity and pressure only to traces on its own facets, so the cell block
// can be eliminated per cell and the global solve shrinks to the trace
// unknowns. The monolithic assembly in solver.hpp stays as the reference;
// both paths must produce the same solution and the test suite pins that.

#include <Eigen/Dense>

#include "hdgns/forms.hpp"
#include "hdgns/solver.hpp"

namespace hdgns {

class CondensedSolver {
 public:
  explicit CondensedSolver(const FormContext& ctx) : ctx_(ctx) {
    const DofSystem& d = ctx.dofs;
    tindex_.assign(d.n_dofs, -1);
    n_trace_free_ = 0;
    for (int i = d.off_ubar; i < d.n_dofs; ++i)
      if (!d.constrained[i]) tindex_[i] = n_trace_free_++;
  }

  int n_trace_free() const { return n_trace_free_; }

  // assemble, eliminate, solve, recover; returns the full-numbering solution
  Eigen::VectorXd step(const Eigen::VectorXd& w, const StepConfig& cfg,
                       const ProblemData& data, double t, const Eigen::VectorXd* u_old,
                       const Eigen::VectorXd& cvals) {
    const Mesh& mesh = ctx_.mesh;
    const DofSystem& d = ctx_.dofs;
    if (cfg.with_time_derivative && cfg.dt <= 0.0)
      throw std::invalid_argument("time step must be positive");

    Eigen::VectorXd rhs_full = assemble_rhs(ctx_, data, t, cfg, u_old);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(200 * mesh.n_cells());
    Eigen::VectorXd bt = Eigen::VectorXd::Zero(n_trace_free_);
    auto push = [&](int r, int c, double v) {
      int fr = tindex_[r];
      if (fr < 0) return;
      int fc = tindex_[c];
      if (fc >= 0)
        trips.emplace_back(fr, fc, v);
      else
        bt[fr] -= v * cvals[c];
    };

    for (int i = d.off_ubar; i < d.n_dofs; ++i)
      if (tindex_[i] >= 0) bt[tindex_[i]] += rhs_full[i];

    const int nl = 2 * d.nv + d.np;
    cells_.resize(mesh.n_cells());
    std::vector<int> slot(d.n_dofs, -1);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      CellElim& ce = cells_[c];
      ce.local_ids.clear();
      ce.trace_ids.clear();
      for (int comp = 0; comp < 2; ++comp)
        for (int i = 0; i < d.nv; ++i) ce.local_ids.push_back(d.u_dof(c, comp, i));
      for (int i = 0; i < d.np; ++i) ce.local_ids.push_back(d.p_dof(c, i));
      // all facets of a free-flow cell carry ubar/psbar, all facets of a
      // porous cell carry pdbar; listing only those keeps the trace pattern tight
      for (int e = 0; e < 3; ++e) {
        int f = mesh.cell_facet[c][e];
        if (mesh.subdomain[c] == 0) {
          for (int comp = 0; comp < 2; ++comp)
            for (int i = 0; i < d.nf; ++i) ce.trace_ids.push_back(d.ubar_dof(f, comp, i));
          for (int i = 0; i < d.nf; ++i) ce.trace_ids.push_back(d.psbar_dof(f, i));
        } else {
          for (int i = 0; i < d.nf; ++i) ce.trace_ids.push_back(d.pdbar_dof(f, i));
        }
      }
      const int ng = static_cast<int>(ce.trace_ids.size());
      for (int i = 0; i < nl; ++i) slot[ce.local_ids[i]] = i;
      for (int i = 0; i < ng; ++i) slot[ce.trace_ids[i]] = nl + i;

      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nl + ng, nl + ng);
      auto add = [&](const LocalBlock& blk, bool also_transpose) {
        for (size_t i = 0; i < blk.rows.size(); ++i) {
          int si = slot[blk.rows[i]];
          for (size_t j = 0; j < blk.cols.size(); ++j) {
            int sj = slot[blk.cols[j]];
            M(si, sj) += blk.A(i, j);
            if (also_transpose) M(sj, si) += blk.A(i, j);
          }
        }
      };
      if (mesh.subdomain[c] == 0) {
        add(local_ah_s(ctx_, c), false);
        add(local_th(ctx_, c, w), false);
        if (cfg.with_time_derivative) {
          LocalBlock m = local_mass(ctx_, c);
          m.A *= 1.0 / cfg.dt;
          add(m, false);
        }
      } else {
        add(local_ad(ctx_, c), false);
      }
      add(local_bh(ctx_, c), true);

      Eigen::VectorXd bl(nl);
      for (int i = 0; i < nl; ++i) bl(i) = rhs_full[ce.local_ids[i]];

      ce.lu.compute(M.topLeftCorner(nl, nl));
      ce.M_lg = M.topRightCorner(nl, ng);
      ce.b_l = bl;
      Eigen::MatrixXd Y = ce.lu.solve(ce.M_lg);          // M_ll^-1 M_lg
      Eigen::VectorXd y = ce.lu.solve(bl);               // M_ll^-1 b_l
      Eigen::MatrixXd S =
          M.bottomRightCorner(ng, ng) - M.bottomLeftCorner(ng, nl) * Y;
      Eigen::VectorXd g = M.bottomLeftCorner(ng, nl) * y;

      for (int i = 0; i < ng; ++i) {
        int fr = tindex_[ce.trace_ids[i]];
        if (fr >= 0) bt[fr] -= g(i);
        for (int j = 0; j < ng; ++j) push(ce.trace_ids[i], ce.trace_ids[j], S(i, j));
      }
      for (int id : ce.local_ids) slot[id] = -1;
      for (int id : ce.trace_ids) slot[id] = -1;
    }

    for (int f = 0; f < mesh.n_facets(); ++f) {
      auto add_trace = [&](const LocalBlock& blk, bool also_transpose) {
        for (size_t i = 0; i < blk.rows.size(); ++i)
          for (size_t j = 0; j < blk.cols.size(); ++j) {
            push(blk.rows[i], blk.cols[j], blk.A(i, j));
            if (also_transpose) push(blk.cols[j], blk.rows[i], blk.A(i, j));
          }
      };
      if (mesh.facets[f].tag == FacetTag::interface_sd) {
        add_trace(local_aI(ctx_, f), false);
        add_trace(local_th_interface(ctx_, f, w), false);
        add_trace(local_bh_interface(ctx_, f), true);
      } else if (mesh.facets[f].tag == FacetTag::gamma_s_N) {
        add_trace(local_bh_outflow(ctx_, f), true);
      }
    }

    Eigen::SparseMatrix<double> S(n_trace_free_, n_trace_free_);
    S.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed_) {
      solver_.analyze(S);
      analyzed_ = true;
    }
    solver_.factorize(S);
    Eigen::VectorXd xt = solver_.solve(S, bt);

    Eigen::VectorXd full = cvals;
    for (int i = d.off_ubar; i < d.n_dofs; ++i)
      if (tindex_[i] >= 0) full[i] = xt[tindex_[i]];
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const CellElim& ce = cells_[c];
      Eigen::VectorXd xg(ce.trace_ids.size());
      for (size_t i = 0; i < ce.trace_ids.size(); ++i) xg(i) = full[ce.trace_ids[i]];
      Eigen::VectorXd xl = ce.lu.solve(ce.b_l - ce.M_lg * xg);
      for (int i = 0; i < nl; ++i) full[ce.local_ids[i]] = xl(i);
    }
    return full;
  }

  double last_rel_residual() const { return solver_.last_rel_residual(); }

 private:
  struct CellElim {
    std::vector<int> local_ids, trace_ids;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::MatrixXd M_lg;
    Eigen::VectorXd b_l;
  };

  const FormContext& ctx_;
  std::vector<int> tindex_;
  int n_trace_free_ = 0;
  std::vector<CellElim> cells_;
  LinearSolver solver_;
  bool analyzed_ = false;
};

}  // namespace hdgns
