#pragma once

// Global assembly into the reduced (free-dof) linear system plus a sparse
// direct solver wrapper. The sparsity pattern is kept identical across time
// steps: every operator block is assembled each time, including convection
// with a zero transport field, so explicit zeros land on the same entries
// and the symbolic factorization can be reused.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#ifdef HDGNS_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include <stdexcept>
#include <vector>

#include "hdgns/forms.hpp"

namespace hdgns {

struct StepConfig {
  bool with_convection = true;
  bool with_time_derivative = true;  // adds (1/dt) * mass
  double dt = 0.0;
};

namespace detail {

inline void push_block(std::vector<Eigen::Triplet<double>>& out, const LocalBlock& blk,
                       bool also_transpose = false) {
  for (int i = 0; i < blk.A.rows(); ++i)
    for (int j = 0; j < blk.A.cols(); ++j) {
      out.emplace_back(blk.rows[i], blk.cols[j], blk.A(i, j));
      if (also_transpose) out.emplace_back(blk.cols[j], blk.rows[i], blk.A(i, j));
    }
}

}  // namespace detail

// full-numbering triplets of the spatial operator at transport field w
inline std::vector<Eigen::Triplet<double>> operator_triplets(const FormContext& ctx,
                                                             const Eigen::VectorXd& w,
                                                             const StepConfig& cfg) {
  std::vector<Eigen::Triplet<double>> trips;
  const Mesh& mesh = ctx.mesh;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (mesh.subdomain[c] == 0) {
      detail::push_block(trips, local_ah_s(ctx, c));
      detail::push_block(trips, local_th(ctx, c, w));
      if (cfg.with_time_derivative) {
        if (cfg.dt <= 0.0) throw std::invalid_argument("time step must be positive");
        LocalBlock m = local_mass(ctx, c);
        m.A *= 1.0 / cfg.dt;
        detail::push_block(trips, m);
      }
    } else {
      detail::push_block(trips, local_ad(ctx, c));
    }
    detail::push_block(trips, local_bh(ctx, c), /*also_transpose=*/true);
  }
  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (mesh.facets[f].tag == FacetTag::interface_sd) {
      detail::push_block(trips, local_aI(ctx, f));
      detail::push_block(trips, local_th_interface(ctx, f, w));
      detail::push_block(trips, local_bh_interface(ctx, f), /*also_transpose=*/true);
    } else if (mesh.facets[f].tag == FacetTag::gamma_s_N) {
      detail::push_block(trips, local_bh_outflow(ctx, f), /*also_transpose=*/true);
    }
  }
  return trips;
}

struct ReducedSystem {
  Eigen::SparseMatrix<double> A;  // n_free x n_free
  Eigen::VectorXd lift_rhs;       // moved constrained columns
};

inline ReducedSystem reduce_system(const DofSystem& dofs,
                                   const std::vector<Eigen::Triplet<double>>& trips,
                                   const Eigen::VectorXd& constrained_vals) {
  ReducedSystem sys;
  sys.lift_rhs = Eigen::VectorXd::Zero(dofs.n_free);
  std::vector<Eigen::Triplet<double>> red;
  red.reserve(trips.size());
  for (const auto& t : trips) {
    int fr = dofs.free_index[t.row()];
    if (fr < 0) continue;
    int fc = dofs.free_index[t.col()];
    if (fc >= 0)
      red.emplace_back(fr, fc, t.value());
    else
      sys.lift_rhs[fr] -= t.value() * constrained_vals[t.col()];
  }
  sys.A.resize(dofs.n_free, dofs.n_free);
  sys.A.setFromTriplets(red.begin(), red.end());
  return sys;
}

// full-numbering load vector: volume loads, boundary and interface data, and
// the backward Euler history term (1/dt) (u_old, v)
inline Eigen::VectorXd assemble_rhs(const FormContext& ctx, const ProblemData& data,
                                    double t, const StepConfig& cfg,
                                    const Eigen::VectorXd* u_old = nullptr) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ctx.dofs.n_dofs);
  const Mesh& mesh = ctx.mesh;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    LocalVec lv = local_rhs_cell(ctx, c, data, t);
    for (size_t i = 0; i < lv.rows.size(); ++i) rhs[lv.rows[i]] += lv.b(i);
    if (cfg.with_time_derivative && mesh.subdomain[c] == 0) {
      if (!u_old) throw std::invalid_argument("history state required");
      LocalBlock m = local_mass(ctx, c);
      Eigen::VectorXd uo(m.cols.size());
      for (size_t i = 0; i < m.cols.size(); ++i) uo(i) = (*u_old)[m.cols[i]];
      Eigen::VectorXd mb = m.A * uo / cfg.dt;
      for (size_t i = 0; i < m.rows.size(); ++i) rhs[m.rows[i]] += mb(i);
    }
  }
  for (int f = 0; f < mesh.n_facets(); ++f) {
    LocalVec lv = local_rhs_facet(ctx, f, data, t);
    for (size_t i = 0; i < lv.rows.size(); ++i) rhs[lv.rows[i]] += lv.b(i);
  }
  return rhs;
}

inline Eigen::VectorXd reduce_rhs(const DofSystem& dofs, const Eigen::VectorXd& full,
                                  const ReducedSystem& sys) {
  Eigen::VectorXd r = sys.lift_rhs;
  for (int i = 0; i < dofs.n_dofs; ++i)
    if (dofs.free_index[i] >= 0) r[dofs.free_index[i]] += full[i];
  return r;
}

// expand a free-dof solution to the full numbering, filling constrained slots
inline Eigen::VectorXd expand_solution(const DofSystem& dofs, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& constrained_vals) {
  Eigen::VectorXd full = constrained_vals;
  for (int i = 0; i < dofs.n_dofs; ++i)
    if (dofs.free_index[i] >= 0) full[i] = x[dofs.free_index[i]];
  return full;
}

class LinearSolver {
 public:
  // symbolic analysis once per pattern, numeric factorization per matrix
  void analyze(const Eigen::SparseMatrix<double>& A) {
    solver_.analyzePattern(A);
    analyzed_ = true;
  }

  void factorize(const Eigen::SparseMatrix<double>& A) {
    if (!analyzed_) analyze(A);
    solver_.factorize(A);
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("linear solver: factorization failed (singular system?)");
  }

  Eigen::VectorXd solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                        double rel_tol = 1e-10) {
    Eigen::VectorXd x = solver_.solve(b);
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("linear solver: solve failed");
    double denom = std::max(b.norm(), 1e-300);
    last_rel_residual_ = (A * x - b).norm() / denom;
    if (!(last_rel_residual_ <= rel_tol))
      throw std::runtime_error("linear solver: residual check failed, rel residual " +
                               std::to_string(last_rel_residual_));
    return x;
  }

  double last_rel_residual() const { return last_rel_residual_; }

  static const char* backend() {
#ifdef HDGNS_HAVE_UMFPACK
    return "umfpack";
#else
    return "sparselu";
#endif
  }

 private:
#ifdef HDGNS_HAVE_UMFPACK
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> solver_;
#else
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
#endif
  bool analyzed_ = false;
  double last_rel_residual_ = 0.0;
};

}  // namespace hdgns
