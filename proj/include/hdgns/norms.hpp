#pragma once

// Gram matrices of the mesh-dependent velocity and pressure norms, assembled
// over the full dof numbering. Velocity Grams touch only velocity-type dofs,
// pressure Grams only pressure-type dofs; everything else stays zero.
//
//   free-flow part:   sum_K |grad v|^2 + 1/h_K |v - vbar|^2 on cell boundaries
//   porous part:      |v|_div^2 + facet jump penalties + interface mismatch
//   combined norm:    both parts + |vbar^t|^2 on the interface
//   pressure norm:    |q|^2 + sum_K h_K |qbar|^2 on cell boundaries

#include <Eigen/Sparse>
#include <vector>

#include "hdgns/forms.hpp"

namespace hdgns {

enum class VelocityNorm { free_flow, porous, combined };
enum class PressureNorm { free_flow, porous, both };

namespace detail {

using Trip = Eigen::Triplet<double>;

inline void add_block(std::vector<Trip>& out, const std::vector<int>& rows,
                      const std::vector<int>& cols, const Eigen::MatrixXd& A) {
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      if (A(i, j) != 0.0) out.emplace_back(rows[i], cols[j], A(i, j));
}

inline void velocity_gram_s(const FormContext& ctx, std::vector<Trip>& out) {
  const auto& tab = ctx.tab;
  const Mesh& mesh = ctx.mesh;
  const int nv = tab.nv, nf = tab.nf;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (mesh.subdomain[c] != 0) continue;
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    detail::CellGrad g(tab.dphix, tab.dphiy, map);

    std::vector<int> ids = detail::s_momentum_dofs(mesh, ctx.dofs, c);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ids.size(), ids.size());

    Eigen::MatrixXd Kg = Eigen::MatrixXd::Zero(nv, nv);
    for (int q = 0; q < g.dx.cols(); ++q) {
      double w = tab.crule->w[q] * map.detJ;
      Kg.noalias() += w * (g.dx.col(q) * g.dx.col(q).transpose() +
                           g.dy.col(q) * g.dy.col(q).transpose());
    }
    A.block(0, 0, nv, nv) = Kg;
    A.block(nv, nv, nv, nv) = Kg;

    for (int e = 0; e < 3; ++e) {
      int f = mesh.cell_facet[c][e];
      int o = mesh.edge_forward[c][e] ? 0 : 1;
      FacetGeometry fg = facet_geometry(mesh, f);
      const Eigen::MatrixXd& tphi = tab.tphi[e][o];
      double hinv = 1.0 / mesh.h_cell[c];
      int ub = 2 * nv + 2 * nf * e;
      for (int q = 0; q < tab.eL.cols(); ++q) {
        double wl = tab.erule->w[q] * fg.length * hinv;
        Eigen::VectorXd ph = tphi.col(q), L = tab.eL.col(q);
        for (int comp = 0; comp < 2; ++comp) {
          int cu = comp * nv, cb = ub + comp * nf;
          A.block(cu, cu, nv, nv).noalias() += wl * ph * ph.transpose();
          A.block(cu, cb, nv, nf).noalias() -= wl * ph * L.transpose();
          A.block(cb, cu, nf, nv).noalias() -= wl * L * ph.transpose();
          A.block(cb, cb, nf, nf).noalias() += wl * L * L.transpose();
        }
      }
    }
    add_block(out, ids, ids, A);
  }
}

inline void velocity_gram_d(const FormContext& ctx, std::vector<Trip>& out) {
  const auto& tab = ctx.tab;
  const Mesh& mesh = ctx.mesh;
  const DofSystem& d = ctx.dofs;
  const int nv = tab.nv, nf = tab.nf;

  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (mesh.subdomain[c] != 1) continue;
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    detail::CellGrad g(tab.dphix, tab.dphiy, map);
    std::vector<int> ids = detail::cell_velocity_dofs(d, c);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * nv, 2 * nv);
    for (int q = 0; q < tab.phi.cols(); ++q) {
      double w = tab.crule->w[q] * map.detJ;
      Eigen::VectorXd dv(2 * nv);
      dv << g.dx.col(q), g.dy.col(q);  // div(phi_j e_c) stacked
      A.noalias() += w * dv * dv.transpose();
      A.block(0, 0, nv, nv).noalias() += w * tab.phi.col(q) * tab.phi.col(q).transpose();
      A.block(nv, nv, nv, nv).noalias() += w * tab.phi.col(q) * tab.phi.col(q).transpose();
    }
    add_block(out, ids, ids, A);
  }

  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& F = mesh.facets[f];
    FacetGeometry fg = facet_geometry(mesh, f);
    if (F.tag == FacetTag::interior_d || F.tag == FacetTag::gamma_d_N) {
      // normal-jump penalty, single trace on boundary facets
      int c0 = F.cell0, c1 = F.cell1;
      std::vector<int> ids = detail::cell_velocity_dofs(d, c0);
      int e0 = 0;
      while (mesh.cell_facet[c0][e0] != f) ++e0;
      int o0 = mesh.edge_forward[c0][e0] ? 0 : 1;
      int n0 = 2 * ctx.tab.nv;
      int ncols = n0;
      int e1 = -1, o1 = 0;
      if (c1 >= 0) {
        auto ids1 = detail::cell_velocity_dofs(d, c1);
        ids.insert(ids.end(), ids1.begin(), ids1.end());
        e1 = 0;
        while (mesh.cell_facet[c1][e1] != f) ++e1;
        o1 = mesh.edge_forward[c1][e1] ? 0 : 1;
        ncols += n0;
      }
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ncols, ncols);
      double hinv = 1.0 / fg.length;
      for (int q = 0; q < tab.eL.cols(); ++q) {
        double wl = tab.erule->w[q] * fg.length * hinv;
        Eigen::VectorXd j(ncols);
        j.segment(0, nv) = fg.normal.x() * tab.tphi[e0][o0].col(q);
        j.segment(nv, nv) = fg.normal.y() * tab.tphi[e0][o0].col(q);
        if (c1 >= 0) {
          j.segment(n0, nv) = -fg.normal.x() * tab.tphi[e1][o1].col(q);
          j.segment(n0 + nv, nv) = -fg.normal.y() * tab.tphi[e1][o1].col(q);
        }
        A.noalias() += wl * j * j.transpose();
      }
      add_block(out, ids, ids, A);
    } else if (F.tag == FacetTag::interface_sd) {
      // porous-side normal mismatch against the facet velocity
      int c1 = F.cell1;
      std::vector<int> ids = detail::cell_velocity_dofs(d, c1);
      auto fid = detail::facet_velocity_dofs(d, f);
      ids.insert(ids.end(), fid.begin(), fid.end());
      int e1 = 0;
      while (mesh.cell_facet[c1][e1] != f) ++e1;
      int o1 = mesh.edge_forward[c1][e1] ? 0 : 1;
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ids.size(), ids.size());
      double hinv = 1.0 / mesh.h_cell[c1];
      for (int q = 0; q < tab.eL.cols(); ++q) {
        double wl = tab.erule->w[q] * fg.length * hinv;
        Eigen::VectorXd j(2 * nv + 2 * nf);
        j.segment(0, nv) = fg.normal.x() * tab.tphi[e1][o1].col(q);
        j.segment(nv, nv) = fg.normal.y() * tab.tphi[e1][o1].col(q);
        j.segment(2 * nv, nf) = -fg.normal.x() * tab.eL.col(q);
        j.segment(2 * nv + nf, nf) = -fg.normal.y() * tab.eL.col(q);
        A.noalias() += wl * j * j.transpose();
      }
      add_block(out, ids, ids, A);
    }
  }
}

inline void facet_tangential_gram(const FormContext& ctx, std::vector<Trip>& out) {
  const auto& tab = ctx.tab;
  for (int f = 0; f < ctx.mesh.n_facets(); ++f) {
    if (ctx.mesh.facets[f].tag != FacetTag::interface_sd) continue;
    FacetGeometry g = facet_geometry(ctx.mesh, f);
    Eigen::Matrix2d Pt = Eigen::Matrix2d::Identity() - g.normal * g.normal.transpose();
    auto ids = detail::facet_velocity_dofs(ctx.dofs, f);
    int nf = tab.nf;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf, nf);
    for (int q = 0; q < tab.eL.cols(); ++q)
      M.noalias() += tab.erule->w[q] * g.length * tab.eL.col(q) * tab.eL.col(q).transpose();
    Eigen::MatrixXd A(2 * nf, 2 * nf);
    for (int cc = 0; cc < 2; ++cc)
      for (int dd = 0; dd < 2; ++dd) A.block(dd * nf, cc * nf, nf, nf) = Pt(dd, cc) * M;
    add_block(out, ids, ids, A);
  }
}

}  // namespace detail

inline Eigen::SparseMatrix<double> velocity_norm_gram(const FormContext& ctx,
                                                      VelocityNorm which) {
  std::vector<detail::Trip> trips;
  if (which != VelocityNorm::porous) detail::velocity_gram_s(ctx, trips);
  if (which != VelocityNorm::free_flow) detail::velocity_gram_d(ctx, trips);
  if (which == VelocityNorm::combined) detail::facet_tangential_gram(ctx, trips);
  Eigen::SparseMatrix<double> G(ctx.dofs.n_dofs, ctx.dofs.n_dofs);
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

inline Eigen::SparseMatrix<double> pressure_norm_gram(const FormContext& ctx,
                                                      PressureNorm which) {
  const auto& tab = ctx.tab;
  const Mesh& mesh = ctx.mesh;
  const DofSystem& d = ctx.dofs;
  std::vector<detail::Trip> trips;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    bool s_cell = mesh.subdomain[c] == 0;
    if (s_cell && which == PressureNorm::porous) continue;
    if (!s_cell && which == PressureNorm::free_flow) continue;
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    for (int i = 0; i < tab.np; ++i)
      trips.emplace_back(d.p_dof(c, i), d.p_dof(c, i), map.detJ);  // orthonormal basis
    for (int e = 0; e < 3; ++e) {
      int f = mesh.cell_facet[c][e];
      FacetGeometry fg = facet_geometry(mesh, f);
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(tab.nf, tab.nf);
      for (int q = 0; q < tab.eL.cols(); ++q)
        M.noalias() += tab.erule->w[q] * fg.length * tab.eL.col(q) * tab.eL.col(q).transpose();
      std::vector<int> ids(tab.nf);
      for (int i = 0; i < tab.nf; ++i)
        ids[i] = s_cell ? d.psbar_dof(f, i) : d.pdbar_dof(f, i);
      detail::add_block(trips, ids, ids, mesh.h_cell[c] * M);
    }
  }
  Eigen::SparseMatrix<double> G(d.n_dofs, d.n_dofs);
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

}  // namespace hdgns
