#pragma once

// Small dense eigenvalue probes of the discrete operator: inf-sup constant of
// the pressure/velocity coupling, coercivity constant of the symmetric part
// of the vector form, and the discrete Poincare constant of the free-flow
// norm. Dense linear algebra, guarded by a cell-count cap.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "hdgns/norms.hpp"
#include "hdgns/solver.hpp"

namespace hdgns {

inline constexpr int kProbeCellCap = 1000;

namespace detail {

// free dofs split into velocity-type and pressure-type index lists
struct FreeSplit {
  std::vector<int> vel, prs;  // full-numbering dof ids
};

inline FreeSplit split_free_dofs(const DofSystem& d) {
  FreeSplit s;
  for (int i = 0; i < d.n_dofs; ++i) {
    if (d.free_index[i] < 0) continue;
    bool is_vel = (i >= d.off_u && i < d.off_p) || (i >= d.off_ubar && i < d.off_psbar);
    (is_vel ? s.vel : s.prs).push_back(i);
  }
  return s;
}

inline Eigen::MatrixXd dense_sub(const Eigen::SparseMatrix<double>& A,
                                 const std::vector<int>& rows,
                                 const std::vector<int>& cols) {
  std::vector<int> rpos(A.rows(), -1);
  for (size_t i = 0; i < rows.size(); ++i) rpos[rows[i]] = static_cast<int>(i);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows.size(), cols.size());
  for (size_t j = 0; j < cols.size(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, cols[j]); it; ++it)
      if (rpos[it.row()] >= 0) M(rpos[it.row()], j) = it.value();
  return M;
}

}  // namespace detail

// smallest singular value of the pressure coupling measured in the natural
// norms: sqrt of the smallest eigenvalue of B Nv^-1 B^T against Np
inline double infsup_probe(const FormContext& ctx) {
  if (ctx.mesh.n_cells() > kProbeCellCap)
    throw std::invalid_argument("probe mesh too large for dense eigensolve");
  const DofSystem& d = ctx.dofs;

  std::vector<Eigen::Triplet<double>> trips;
  for (int c = 0; c < ctx.mesh.n_cells(); ++c)
    detail::push_block(trips, local_bh(ctx, c));
  for (int f = 0; f < ctx.mesh.n_facets(); ++f)
    if (ctx.mesh.facets[f].tag == FacetTag::interface_sd)
      detail::push_block(trips, local_bh_interface(ctx, f));
    else if (ctx.mesh.facets[f].tag == FacetTag::gamma_s_N)
      detail::push_block(trips, local_bh_outflow(ctx, f));
  Eigen::SparseMatrix<double> Bfull(d.n_dofs, d.n_dofs);
  Bfull.setFromTriplets(trips.begin(), trips.end());

  auto split = detail::split_free_dofs(d);
  Eigen::MatrixXd B = detail::dense_sub(Bfull, split.prs, split.vel);
  Eigen::MatrixXd Nv = detail::dense_sub(velocity_norm_gram(ctx, VelocityNorm::combined),
                                         split.vel, split.vel);
  Eigen::MatrixXd Np = detail::dense_sub(pressure_norm_gram(ctx, PressureNorm::both),
                                         split.prs, split.prs);

  Eigen::LLT<Eigen::MatrixXd> llt(Nv);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("velocity norm Gram not positive definite");
  Eigen::MatrixXd G = B * llt.solve(B.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Np);
  if (es.info() != Eigen::Success) throw std::runtime_error("inf-sup eigensolve failed");
  double lam = es.eigenvalues()(0);
  return lam > 0 ? std::sqrt(lam) : 0.0;
}

// smallest eigenvalue of the symmetrized vector form against the velocity
// norm Gram, stationary operator without transport
inline double coercivity_probe(const FormContext& ctx) {
  if (ctx.mesh.n_cells() > kProbeCellCap)
    throw std::invalid_argument("probe mesh too large for dense eigensolve");
  const DofSystem& d = ctx.dofs;

  std::vector<Eigen::Triplet<double>> trips;
  for (int c = 0; c < ctx.mesh.n_cells(); ++c) {
    if (ctx.mesh.subdomain[c] == 0)
      detail::push_block(trips, local_ah_s(ctx, c));
    else
      detail::push_block(trips, local_ad(ctx, c));
  }
  for (int f = 0; f < ctx.mesh.n_facets(); ++f)
    if (ctx.mesh.facets[f].tag == FacetTag::interface_sd)
      detail::push_block(trips, local_aI(ctx, f));
  Eigen::SparseMatrix<double> Afull(d.n_dofs, d.n_dofs);
  Afull.setFromTriplets(trips.begin(), trips.end());

  auto split = detail::split_free_dofs(d);
  Eigen::MatrixXd A = detail::dense_sub(Afull, split.vel, split.vel);
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::MatrixXd Nv = detail::dense_sub(velocity_norm_gram(ctx, VelocityNorm::combined),
                                         split.vel, split.vel);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Nv);
  if (es.info() != Eigen::Success) throw std::runtime_error("coercivity eigensolve failed");
  return es.eigenvalues()(0);
}

// largest ratio |v|_{L2, free flow}^2 / |||v|||_{v,s}^2 over free dofs of the
// free-flow part; its square root bounds the discrete Poincare constant
inline double poincare_probe(const FormContext& ctx) {
  if (ctx.mesh.n_cells() > kProbeCellCap)
    throw std::invalid_argument("probe mesh too large for dense eigensolve");
  const DofSystem& d = ctx.dofs;

  // L2 mass of the free-flow cells over velocity dofs
  std::vector<Eigen::Triplet<double>> trips;
  for (int c = 0; c < ctx.mesh.n_cells(); ++c) {
    if (ctx.mesh.subdomain[c] != 0) continue;
    LocalBlock m = local_mass(ctx, c);
    detail::push_block(trips, m);
  }
  Eigen::SparseMatrix<double> Mfull(d.n_dofs, d.n_dofs);
  Mfull.setFromTriplets(trips.begin(), trips.end());

  // restrict to velocity dofs attached to the free-flow side
  std::vector<int> ids;
  for (int c = 0; c < ctx.mesh.n_cells(); ++c) {
    if (ctx.mesh.subdomain[c] != 0) continue;
    for (int comp = 0; comp < 2; ++comp)
      for (int i = 0; i < d.nv; ++i) {
        int dof = d.u_dof(c, comp, i);
        if (d.free_index[dof] >= 0) ids.push_back(dof);
      }
  }
  for (int f = 0; f < ctx.mesh.n_facets(); ++f) {
    if (!is_s_side(ctx.mesh.facets[f].tag)) continue;
    for (int comp = 0; comp < 2; ++comp)
      for (int i = 0; i < d.nf; ++i) {
        int dof = d.ubar_dof(f, comp, i);
        if (d.free_index[dof] >= 0) ids.push_back(dof);
      }
  }

  Eigen::MatrixXd M = detail::dense_sub(Mfull, ids, ids);
  Eigen::MatrixXd N = detail::dense_sub(velocity_norm_gram(ctx, VelocityNorm::free_flow),
                                        ids, ids);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(M, N);
  if (es.info() != Eigen::Success) throw std::runtime_error("poincare eigensolve failed");
  return std::sqrt(es.eigenvalues().maxCoeff());
}

}  // namespace hdgns
