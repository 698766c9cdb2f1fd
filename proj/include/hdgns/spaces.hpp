#pragma once

// Degrees of freedom for the hybrid scheme. Cell velocity is vector P_k per
// cell, cell pressure P_{k-1}; facet unknowns (velocity trace on free-flow
// facets, pressure traces on both sides) are P_k on each facet. Also hosts
// the L2 projections and the divergence-conforming (BDM-type) interpolant
// whose facet moments are computed once per facet so the normal trace is
// single valued.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hdgns/basis.hpp"
#include "hdgns/mesh.hpp"
#include "hdgns/quadrature.hpp"

namespace hdgns {

enum class BcMode { homogeneous, manufactured };

struct DofSystem {
  const Mesh* mesh = nullptr;
  int k = 1;
  BcMode mode = BcMode::homogeneous;
  int nv = 0;  // scalar cell space dim, P_k
  int np = 0;  // cell pressure dim, P_{k-1}
  int nf = 0;  // facet scalar dim, k+1

  std::vector<int> ubar_slot;   // facet -> ordinal among free-flow facets, else -1
  std::vector<int> pdbar_slot;  // facet -> ordinal among porous facets, else -1
  int n_sfacets = 0, n_dfacets = 0;
  int off_u = 0, off_p = 0, off_ubar = 0, off_psbar = 0, off_pdbar = 0;
  int n_dofs = 0;

  std::vector<bool> constrained;
  std::vector<int> free_index;  // -1 when constrained
  int n_free = 0;

  int u_dof(int c, int comp, int i) const { return off_u + (2 * c + comp) * nv + i; }
  int p_dof(int c, int i) const { return off_p + c * np + i; }
  bool has_ubar(int f) const { return ubar_slot[f] >= 0; }
  bool has_pdbar(int f) const { return pdbar_slot[f] >= 0; }
  int ubar_dof(int f, int comp, int i) const {
    return off_ubar + (2 * ubar_slot[f] + comp) * nf + i;
  }
  int psbar_dof(int f, int i) const { return off_psbar + ubar_slot[f] * nf + i; }
  int pdbar_dof(int f, int i) const { return off_pdbar + pdbar_slot[f] * nf + i; }
};

inline DofSystem build_dofs(const Mesh& mesh, int k, BcMode mode) {
  if (k < 1 || k > kMaxBasisDegree)
    throw std::invalid_argument("build_dofs: polynomial degree outside [1,4]");
  DofSystem d;
  d.mesh = &mesh;
  d.k = k;
  d.mode = mode;
  d.nv = cell_space_dim(k);
  d.np = cell_space_dim(k - 1);
  d.nf = k + 1;

  d.ubar_slot.assign(mesh.n_facets(), -1);
  d.pdbar_slot.assign(mesh.n_facets(), -1);
  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (is_s_side(mesh.facets[f].tag)) d.ubar_slot[f] = d.n_sfacets++;
    if (is_d_side(mesh.facets[f].tag)) d.pdbar_slot[f] = d.n_dfacets++;
  }
  int nc = mesh.n_cells();
  d.off_u = 0;
  d.off_p = 2 * d.nv * nc;
  d.off_ubar = d.off_p + d.np * nc;
  d.off_psbar = d.off_ubar + 2 * d.nf * d.n_sfacets;
  d.off_pdbar = d.off_psbar + d.nf * d.n_sfacets;
  d.n_dofs = d.off_pdbar + d.nf * d.n_dfacets;

  d.constrained.assign(d.n_dofs, false);
  for (int f = 0; f < mesh.n_facets(); ++f) {
    FacetTag tag = mesh.facets[f].tag;
    bool clamp_ubar = (tag == FacetTag::gamma_s_D) ||
                      (tag == FacetTag::gamma_s_N && mode == BcMode::homogeneous);
    if (clamp_ubar)
      for (int comp = 0; comp < 2; ++comp)
        for (int i = 0; i < d.nf; ++i) d.constrained[d.ubar_dof(f, comp, i)] = true;
    if (tag == FacetTag::gamma_d_D)
      for (int i = 0; i < d.nf; ++i) d.constrained[d.pdbar_dof(f, i)] = true;
  }
  d.free_index.assign(d.n_dofs, -1);
  for (int i = 0; i < d.n_dofs; ++i)
    if (!d.constrained[i]) d.free_index[i] = d.n_free++;
  return d;
}

struct State {
  double t = 0.0;
  Eigen::VectorXd x;
};

// ---- L2 projections ------------------------------------------------------

// Projection onto the scalar cell space of the given degree. Coefficients are
// per cell, orthonormal reference basis, so mass inversion is a detJ scaling.
inline Eigen::VectorXd project_cells(
    const Mesh& mesh, int degree, const std::function<double(const Eigen::Vector2d&)>& f,
    int quad_degree = -1) {
  const CellBasis& basis = cell_basis(degree);
  if (quad_degree < 0) quad_degree = std::min(2 * degree + 8, kMaxQuadratureDegree);
  const TriangleRule& rule = triangle_quadrature(quad_degree);
  Eigen::MatrixXd tab = basis.tabulate(rule.p);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.n_cells() * basis.ndof);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    for (size_t q = 0; q < rule.p.size(); ++q) {
      double fv = f(map.to_physical(rule.p[q]));
      out.segment(c * basis.ndof, basis.ndof) += rule.w[q] * fv * tab.col(q);
    }
  }
  return out;
}

// Projection of a scalar callback onto a single facet's trace space.
inline Eigen::VectorXd project_facet(
    const Mesh& mesh, int f, int degree,
    const std::function<double(const Eigen::Vector2d&)>& g, int quad_degree = -1) {
  const EdgeBasis& basis = edge_basis(degree);
  if (quad_degree < 0) quad_degree = std::min(2 * degree + 8, kMaxQuadratureDegree);
  const EdgeRule& rule = edge_quadrature(quad_degree);
  Eigen::Vector2d a = mesh.verts[mesh.facets[f].v[0]];
  Eigen::Vector2d b = mesh.verts[mesh.facets[f].v[1]];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.ndof);
  for (size_t q = 0; q < rule.s.size(); ++q) {
    Eigen::Vector2d x = a + rule.s[q] * (b - a);
    out += rule.w[q] * g(x) * basis.eval(rule.s[q]);
  }
  return out;
}

// ---- pointwise evaluation from a coefficient vector ----------------------

inline Eigen::Vector2d eval_cell_velocity(const DofSystem& d, const Eigen::VectorXd& x,
                                          int c, const Eigen::Vector2d& ref) {
  const CellBasis& basis = cell_basis(d.k);
  Eigen::VectorXd phi = basis.eval(ref);
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  for (int i = 0; i < d.nv; ++i) {
    u.x() += x[d.u_dof(c, 0, i)] * phi(i);
    u.y() += x[d.u_dof(c, 1, i)] * phi(i);
  }
  return u;
}

inline Eigen::Matrix2d eval_cell_velocity_grad(const DofSystem& d, const Eigen::VectorXd& x,
                                               int c, const Eigen::Vector2d& ref,
                                               const AffineMap& map) {
  const CellBasis& basis = cell_basis(d.k);
  Eigen::MatrixXd gref = basis.eval_grad(ref);
  Eigen::Matrix2d G = Eigen::Matrix2d::Zero();  // G(i,j) = d u_i / d x_j
  for (int i = 0; i < d.nv; ++i) {
    Eigen::Vector2d g = map.grad_to_physical(gref.row(i).transpose());
    G.row(0) += x[d.u_dof(c, 0, i)] * g.transpose();
    G.row(1) += x[d.u_dof(c, 1, i)] * g.transpose();
  }
  return G;
}

inline double eval_cell_pressure(const DofSystem& d, const Eigen::VectorXd& x, int c,
                                 const Eigen::Vector2d& ref) {
  const CellBasis& basis = cell_basis(d.k - 1);
  Eigen::VectorXd psi = basis.eval(ref);
  double p = 0.0;
  for (int i = 0; i < d.np; ++i) p += x[d.p_dof(c, i)] * psi(i);
  return p;
}

inline Eigen::Vector2d eval_facet_velocity(const DofSystem& d, const Eigen::VectorXd& x,
                                           int f, double s) {
  const EdgeBasis& basis = edge_basis(d.k);
  Eigen::VectorXd L = basis.eval(s);
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  for (int i = 0; i < d.nf; ++i) {
    u.x() += x[d.ubar_dof(f, 0, i)] * L(i);
    u.y() += x[d.ubar_dof(f, 1, i)] * L(i);
  }
  return u;
}

inline double eval_facet_pressure_s(const DofSystem& d, const Eigen::VectorXd& x, int f,
                                    double s) {
  const EdgeBasis& basis = edge_basis(d.k);
  Eigen::VectorXd L = basis.eval(s);
  double p = 0.0;
  for (int i = 0; i < d.nf; ++i) p += x[d.psbar_dof(f, i)] * L(i);
  return p;
}

inline double eval_facet_pressure_d(const DofSystem& d, const Eigen::VectorXd& x, int f,
                                    double s) {
  const EdgeBasis& basis = edge_basis(d.k);
  Eigen::VectorXd L = basis.eval(s);
  double p = 0.0;
  for (int i = 0; i < d.nf; ++i) p += x[d.pdbar_dof(f, i)] * L(i);
  return p;
}

// reference coordinates of local edge e at canonical facet parameter s
inline Eigen::Vector2d ref_edge_point(const Mesh& mesh, int c, int e, double s) {
  static const Eigen::Vector2d rv[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  double sl = mesh.edge_forward[c][e] ? s : 1.0 - s;
  return rv[e] + sl * (rv[(e + 1) % 3] - rv[e]);
}

// ---- divergence-conforming interpolant -----------------------------------

// Interpolates per-subdomain velocity callbacks into the cell velocity block.
// Edge rows use moments against the facet Legendre basis with the canonical
// facet normal (shared by both neighbours); interior rows (k >= 2) use the
// classical complement {grad q : q in P_{k-1} nonconstant} and
// {curl(bubble * q) : q in P_{k-2}}.
inline void bdm_interpolate(
    const Mesh& mesh, const DofSystem& d,
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& u_s,
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& u_d,
    Eigen::VectorXd& coeffs) {
  const int k = d.k;
  const CellBasis& basis = cell_basis(k);
  const EdgeBasis& ebasis = edge_basis(k);
  const EdgeRule& erule = edge_quadrature(std::min(2 * k + 10, kMaxQuadratureDegree));
  const TriangleRule& crule = triangle_quadrature(std::min(2 * k + 10, kMaxQuadratureDegree));
  const int nv = d.nv, nf = d.nf, N = 2 * nv;

  const CellBasis* qgrad = k >= 2 ? &cell_basis(k - 1) : nullptr;
  const CellBasis* qcurl = k >= 2 ? &cell_basis(k - 2) : nullptr;
  int n_grad = k >= 2 ? qgrad->ndof - 1 : 0;
  int n_curl = k >= 2 ? qcurl->ndof : 0;
  if (3 * nf + n_grad + n_curl != N)
    throw std::logic_error("bdm_interpolate: moment count mismatch");

  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    const auto& field = mesh.subdomain[c] == 0 ? u_s : u_d;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
    int row = 0;

    for (int e = 0; e < 3; ++e) {
      int f = mesh.cell_facet[c][e];
      FacetGeometry g = facet_geometry(mesh, f);
      Eigen::Vector2d n = g.normal;  // canonical, identical for both neighbours
      Eigen::Vector2d pa = mesh.verts[mesh.facets[f].v[0]];
      Eigen::Vector2d pb = mesh.verts[mesh.facets[f].v[1]];
      for (int m = 0; m < nf; ++m) {
        for (size_t q = 0; q < erule.s.size(); ++q) {
          double s = erule.s[q];
          double wl = erule.w[q] * g.length * ebasis.eval(s)(m);
          Eigen::Vector2d xq = pa + s * (pb - pa);
          Eigen::VectorXd phi = basis.eval(ref_edge_point(mesh, c, e, s));
          for (int j = 0; j < nv; ++j) {
            A(row, j) += wl * phi(j) * n.x();
            A(row, nv + j) += wl * phi(j) * n.y();
          }
          b(row) += wl * field(xq).dot(n);
        }
        ++row;
      }
    }

    if (k >= 2) {
      Eigen::Vector2d xc = (v[0] + v[1] + v[2]) / 3.0;
      double h = mesh.h_cell[c];
      // physical gradients of the barycentric coordinates
      Eigen::Matrix<double, 2, 3> gl;
      gl.col(0) = map.grad_to_physical({-1.0, -1.0});
      gl.col(1) = map.grad_to_physical({1.0, 0.0});
      gl.col(2) = map.grad_to_physical({0.0, 1.0});
      for (size_t q = 0; q < crule.p.size(); ++q) {
        Eigen::Vector2d ref = crule.p[q];
        Eigen::Vector2d xq = map.to_physical(ref);
        Eigen::Vector2d u((xq - xc) / h);  // scaled local coordinates
        double w = crule.w[q] * map.detJ;
        Eigen::VectorXd phi = basis.eval(ref);
        Eigen::Vector2d uq = field(xq);

        Eigen::Vector3d lam = barycentric_p1(ref);
        double bub = lam(0) * lam(1) * lam(2);
        Eigen::Vector2d gbub = Eigen::Vector2d::Zero();
        for (int i = 0; i < 3; ++i)
          gbub += gl.col(i) * lam((i + 1) % 3) * lam((i + 2) % 3);

        int r = 3 * nf;
        for (int j = 1; j < qgrad->ndof; ++j) {  // skip the constant
          int a = qgrad->expo[j][0], bb = qgrad->expo[j][1];
          Eigen::Vector2d gq(
              a == 0 ? 0.0 : a * std::pow(u.x(), a - 1) * std::pow(u.y(), bb) / h,
              bb == 0 ? 0.0 : bb * std::pow(u.x(), a) * std::pow(u.y(), bb - 1) / h);
          for (int jj = 0; jj < nv; ++jj) {
            A(r, jj) += w * phi(jj) * gq.x();
            A(r, nv + jj) += w * phi(jj) * gq.y();
          }
          b(r) += w * uq.dot(gq);
          ++r;
        }
        for (int j = 0; j < qcurl->ndof; ++j) {
          int a = qcurl->expo[j][0], bb = qcurl->expo[j][1];
          double qv = std::pow(u.x(), a) * std::pow(u.y(), bb);
          Eigen::Vector2d gq(
              a == 0 ? 0.0 : a * std::pow(u.x(), a - 1) * std::pow(u.y(), bb) / h,
              bb == 0 ? 0.0 : bb * std::pow(u.x(), a) * std::pow(u.y(), bb - 1) / h);
          // curl(bubble * q) = (d_y(bq), -d_x(bq))
          Eigen::Vector2d z(bub * gq.y() + qv * gbub.y(), -bub * gq.x() - qv * gbub.x());
          for (int jj = 0; jj < nv; ++jj) {
            A(r, jj) += w * phi(jj) * z.x();
            A(r, nv + jj) += w * phi(jj) * z.y();
          }
          b(r) += w * uq.dot(z);
          ++r;
        }
      }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
      throw std::runtime_error("bdm_interpolate: singular local moment system");
    Eigen::VectorXd loc = lu.solve(b);
    for (int j = 0; j < nv; ++j) {
      coeffs[d.u_dof(c, 0, j)] = loc(j);
      coeffs[d.u_dof(c, 1, j)] = loc(nv + j);
    }
  }
}

// Prescribed (Dirichlet-type) values for the constrained trace DOFs at time t.
// Returns a full-length vector, zero on free entries.
inline Eigen::VectorXd constrained_values(
    const Mesh& mesh, const DofSystem& d,
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)>& dirichlet_us,
    const std::function<double(const Eigen::Vector2d&, double)>& darcy_pd, double t) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d.n_dofs);
  int qdeg = std::min(3 * d.k + 2, kMaxQuadratureDegree);
  for (int f = 0; f < mesh.n_facets(); ++f) {
    FacetTag tag = mesh.facets[f].tag;
    bool ub = d.has_ubar(f) && d.constrained[d.ubar_dof(f, 0, 0)];
    if (ub && dirichlet_us) {
      for (int comp = 0; comp < 2; ++comp) {
        Eigen::VectorXd ci = project_facet(
            mesh, f, d.k,
            [&](const Eigen::Vector2d& x) { return dirichlet_us(x, t)[comp]; }, qdeg);
        for (int i = 0; i < d.nf; ++i) g[d.ubar_dof(f, comp, i)] = ci(i);
      }
    }
    if (tag == FacetTag::gamma_d_D && darcy_pd) {
      Eigen::VectorXd ci = project_facet(
          mesh, f, d.k, [&](const Eigen::Vector2d& x) { return darcy_pd(x, t); }, qdeg);
      for (int i = 0; i < d.nf; ++i) g[d.pdbar_dof(f, i)] = ci(i);
    }
  }
  return g;
}

}  // namespace hdgns
