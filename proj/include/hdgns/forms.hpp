#pragma once

// Element-local matrices and load vectors of the hybridized scheme:
//   ah_s : viscous  (2 mu eps(u), eps(v)) with trace penalty 2 beta mu / h_K
//          and the two symmetrizing consistency terms
//   ad   : Darcy    (mu / kappa_K) (u, v)
//   aI   : interface Beavers-Joseph-Saffman tangential term
//   th   : lagged convection, cell + upwinded trace part + interface part
//   bh   : pressure/velocity coupling, cell divergence + facet normal-trace
//          moments + interface trace coupling
// Facet integrals run in the canonical facet parameterization so the facet
// polynomial space is single valued; cell traces are pre-tabulated for both
// edge orientations.

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hdgns/basis.hpp"
#include "hdgns/mesh.hpp"
#include "hdgns/quadrature.hpp"
#include "hdgns/spaces.hpp"

namespace hdgns {

inline constexpr double kPi = 3.14159265358979323846;

struct PhysParams {
  double mu = 1.0;
  double alpha = 1.0;
  double beta = 0.0;            // 0 resolves to the default 8 k^2
  std::vector<double> kappa;    // per cell, used on porous cells

  double resolved_beta(int k) const { return beta > 0.0 ? beta : 8.0 * k * k; }
};

// Problem data callbacks; null members mean zero.
struct ProblemData {
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> f_s;
  std::function<double(const Eigen::Vector2d&, double)> f_d;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> dirichlet_us;
  // traction datum (2 mu eps(u) - p I) n on the free-flow outflow boundary
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double, const Eigen::Vector2d&)>
      neumann_s;
  std::function<double(const Eigen::Vector2d&, double, const Eigen::Vector2d&)> ud_n;
  std::function<double(const Eigen::Vector2d&, double)> darcy_pd;
  // interface mismatch data of the manufactured setup; n is the canonical
  // interface normal, oriented from the free-flow into the porous side
  std::function<double(const Eigen::Vector2d&, double, const Eigen::Vector2d&)> m_u;
  std::function<double(const Eigen::Vector2d&, double, const Eigen::Vector2d&)> m_p;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double, const Eigen::Vector2d&)>
      m_e_t;
};

inline int cell_quadrature_degree(int k) { return std::max(3 * k, 2 * k + 4); }
inline int facet_quadrature_degree(int k) { return 3 * k + 2; }

struct RefTables {
  int k = 0, nv = 0, np = 0, nf = 0;
  const TriangleRule* crule = nullptr;
  const EdgeRule* erule = nullptr;
  Eigen::MatrixXd phi, dphix, dphiy;  // nv x nq, reference derivatives
  Eigen::MatrixXd psi;                // np x nq
  Eigen::MatrixXd eL;                 // nf x nqe, facet basis (canonical param)
  // cell traces at facet points, [local edge][0 forward / 1 reversed]
  Eigen::MatrixXd tphi[3][2], tdphix[3][2], tdphiy[3][2];
};

inline const RefTables& ref_tables(int k) {
  static std::map<int, RefTables> cache;
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;

  RefTables t;
  t.k = k;
  const CellBasis& vb = cell_basis(k);
  const CellBasis& pb = cell_basis(k - 1);
  const EdgeBasis& eb = edge_basis(k);
  t.nv = vb.ndof;
  t.np = pb.ndof;
  t.nf = eb.ndof;
  t.crule = &triangle_quadrature(cell_quadrature_degree(k));
  t.erule = &edge_quadrature(facet_quadrature_degree(k));

  int nq = static_cast<int>(t.crule->p.size());
  t.phi.resize(t.nv, nq);
  t.dphix.resize(t.nv, nq);
  t.dphiy.resize(t.nv, nq);
  t.psi.resize(t.np, nq);
  for (int q = 0; q < nq; ++q) {
    t.phi.col(q) = vb.eval(t.crule->p[q]);
    Eigen::MatrixXd g = vb.eval_grad(t.crule->p[q]);
    t.dphix.col(q) = g.col(0);
    t.dphiy.col(q) = g.col(1);
    t.psi.col(q) = pb.eval(t.crule->p[q]);
  }

  int nqe = static_cast<int>(t.erule->s.size());
  t.eL.resize(t.nf, nqe);
  static const Eigen::Vector2d rv[3] = {{0, 0}, {1, 0}, {0, 1}};
  for (int q = 0; q < nqe; ++q) t.eL.col(q) = eb.eval(t.erule->s[q]);
  for (int e = 0; e < 3; ++e)
    for (int o = 0; o < 2; ++o) {
      t.tphi[e][o].resize(t.nv, nqe);
      t.tdphix[e][o].resize(t.nv, nqe);
      t.tdphiy[e][o].resize(t.nv, nqe);
      for (int q = 0; q < nqe; ++q) {
        double s = o == 0 ? t.erule->s[q] : 1.0 - t.erule->s[q];
        Eigen::Vector2d ref = rv[e] + s * (rv[(e + 1) % 3] - rv[e]);
        t.tphi[e][o].col(q) = vb.eval(ref);
        Eigen::MatrixXd g = vb.eval_grad(ref);
        t.tdphix[e][o].col(q) = g.col(0);
        t.tdphiy[e][o].col(q) = g.col(1);
      }
    }
  return cache.emplace(k, std::move(t)).first->second;
}

struct FormContext {
  const Mesh& mesh;
  const DofSystem& dofs;
  const PhysParams& params;
  const RefTables& tab;

  FormContext(const Mesh& m, const DofSystem& d, const PhysParams& p)
      : mesh(m), dofs(d), params(p), tab(ref_tables(d.k)) {}

  double kappa_of(int cell) const {
    if (params.kappa.empty()) throw std::logic_error("kappa not set");
    return params.kappa[cell];
  }
};

struct LocalBlock {
  std::vector<int> rows, cols;  // global dof ids (unreduced numbering)
  Eigen::MatrixXd A;
};

struct LocalVec {
  std::vector<int> rows;
  Eigen::VectorXd b;
};

namespace detail {

inline std::vector<int> cell_velocity_dofs(const DofSystem& d, int c) {
  std::vector<int> ids(2 * d.nv);
  for (int comp = 0; comp < 2; ++comp)
    for (int i = 0; i < d.nv; ++i) ids[comp * d.nv + i] = d.u_dof(c, comp, i);
  return ids;
}

// cell velocity followed by the three facet velocity blocks
inline std::vector<int> s_momentum_dofs(const Mesh& mesh, const DofSystem& d, int c) {
  std::vector<int> ids = cell_velocity_dofs(d, c);
  for (int e = 0; e < 3; ++e) {
    int f = mesh.cell_facet[c][e];
    for (int comp = 0; comp < 2; ++comp)
      for (int i = 0; i < d.nf; ++i) ids.push_back(d.ubar_dof(f, comp, i));
  }
  return ids;
}

inline std::vector<int> facet_velocity_dofs(const DofSystem& d, int f) {
  std::vector<int> ids(2 * d.nf);
  for (int comp = 0; comp < 2; ++comp)
    for (int i = 0; i < d.nf; ++i) ids[comp * d.nf + i] = d.ubar_dof(f, comp, i);
  return ids;
}

// physical gradient tables for one cell
struct CellGrad {
  Eigen::MatrixXd dx, dy;
  CellGrad(const Eigen::MatrixXd& dref_x, const Eigen::MatrixXd& dref_y,
           const AffineMap& map) {
    dx = map.invJ(0, 0) * dref_x + map.invJ(1, 0) * dref_y;
    dy = map.invJ(0, 1) * dref_x + map.invJ(1, 1) * dref_y;
  }
};

// lagged velocity of one cell at tabulated points
inline void eval_velocity_table(const DofSystem& d, const Eigen::VectorXd& w, int c,
                                const Eigen::MatrixXd& tab, Eigen::MatrixXd& out) {
  Eigen::VectorXd cx(d.nv), cy(d.nv);
  for (int i = 0; i < d.nv; ++i) {
    cx(i) = w[d.u_dof(c, 0, i)];
    cy(i) = w[d.u_dof(c, 1, i)];
  }
  out.resize(2, tab.cols());
  out.row(0) = cx.transpose() * tab;
  out.row(1) = cy.transpose() * tab;
}

}  // namespace detail

// viscous + penalty + consistency block of one free-flow cell
inline LocalBlock local_ah_s(const FormContext& ctx, int c) {
  const auto& tab = ctx.tab;
  const Mesh& mesh = ctx.mesh;
  const int nv = tab.nv, nf = tab.nf;
  const double mu = ctx.params.mu;
  const double beta = ctx.params.resolved_beta(tab.k);

  auto v = mesh.cell_verts(c);
  AffineMap map(v[0], v[1], v[2]);
  detail::CellGrad g(tab.dphix, tab.dphiy, map);

  LocalBlock blk;
  blk.rows = detail::s_momentum_dofs(mesh, ctx.dofs, c);
  blk.cols = blk.rows;
  const int N = static_cast<int>(blk.rows.size());
  blk.A = Eigen::MatrixXd::Zero(N, N);

  // volume: entry(test (i,dd), trial (j,cc)) =
  //   mu * int [ delta_{cc,dd} grad phi_j . grad phi_i + d_dd phi_j d_cc phi_i ]
  Eigen::MatrixXd Mxx = Eigen::MatrixXd::Zero(nv, nv), Myy = Mxx, Mxy = Mxx;
  for (int q = 0; q < g.dx.cols(); ++q) {
    double w = tab.crule->w[q] * map.detJ;
    Mxx.noalias() += w * g.dx.col(q) * g.dx.col(q).transpose();
    Myy.noalias() += w * g.dy.col(q) * g.dy.col(q).transpose();
    Mxy.noalias() += w * g.dx.col(q) * g.dy.col(q).transpose();
  }
  blk.A.block(0, 0, nv, nv) = mu * (2.0 * Mxx + Myy);
  blk.A.block(nv, nv, nv, nv) = mu * (Mxx + 2.0 * Myy);
  // row comp x, col comp y: mu * d_y phi_i d_x phi_j
  blk.A.block(0, nv, nv, nv) = mu * Mxy.transpose();
  blk.A.block(nv, 0, nv, nv) = mu * Mxy;

  const int nqe = static_cast<int>(tab.erule->s.size());
  for (int e = 0; e < 3; ++e) {
    int f = mesh.cell_facet[c][e];
    int o = mesh.edge_forward[c][e] ? 0 : 1;
    FacetGeometry fg = facet_geometry(mesh, f);
    double sgn = (mesh.facets[f].cell0 == c) ? 1.0 : -1.0;
    Eigen::Vector2d n = sgn * fg.normal;  // outward for this cell
    detail::CellGrad tg(tab.tdphix[e][o], tab.tdphiy[e][o], map);
    const Eigen::MatrixXd& tphi = tab.tphi[e][o];
    const double pen = 2.0 * beta * mu / mesh.h_cell[c];
    const int ub = 2 * nv + 2 * nf * e;  // offset of this facet's velocity block

    for (int q = 0; q < nqe; ++q) {
      double wl = tab.erule->w[q] * fg.length;
      Eigen::VectorXd ph = tphi.col(q);
      Eigen::VectorXd L = tab.eL.col(q);
      Eigen::VectorXd gn = n.x() * tg.dx.col(q) + n.y() * tg.dy.col(q);  // grad phi . n
      Eigen::Matrix<double, Eigen::Dynamic, 2> D(nv, 2);
      D.col(0) = tg.dx.col(q);
      D.col(1) = tg.dy.col(q);

      // penalty 2 beta mu / h <u - ubar, v - vbar>, diagonal in components
      for (int comp = 0; comp < 2; ++comp) {
        int cu = comp * nv, cb = ub + comp * nf;
        blk.A.block(cu, cu, nv, nv).noalias() += pen * wl * ph * ph.transpose();
        blk.A.block(cu, cb, nv, nf).noalias() -= pen * wl * ph * L.transpose();
        blk.A.block(cb, cu, nf, nv).noalias() -= pen * wl * L * ph.transpose();
        blk.A.block(cb, cb, nf, nf).noalias() += pen * wl * L * L.transpose();
      }

      // consistency: T(test, trial) = -<2 mu eps(trial) n, test - testbar>;
      // accumulated directly plus its transpose
      for (int cc = 0; cc < 2; ++cc) {     // trial component (cell function)
        for (int dd = 0; dd < 2; ++dd) {   // test component
          // (2 mu eps(phi_j e_cc) n)_dd = mu (delta gn_j + n_cc d_dd phi_j)
          Eigen::VectorXd flux = mu * (n(cc) * D.col(dd));
          if (cc == dd) flux += mu * gn;
          // test cell block
          blk.A.block(dd * nv, cc * nv, nv, nv).noalias() -=
              wl * ph * flux.transpose();
          blk.A.block(cc * nv, dd * nv, nv, nv).noalias() -=
              wl * flux * ph.transpose();
          // test facet block
          blk.A.block(ub + dd * nf, cc * nv, nf, nv).noalias() +=
              wl * L * flux.transpose();
          blk.A.block(cc * nv, ub + dd * nf, nv, nf).noalias() +=
              wl * flux * L.transpose();
        }
      }
    }
  }
  return blk;
}

// Darcy mass block of one porous cell
inline LocalBlock local_ad(const FormContext& ctx, int c) {
  const auto& tab = ctx.tab;
  auto v = ctx.mesh.cell_verts(c);
  AffineMap map(v[0], v[1], v[2]);
  double coef = ctx.params.mu / ctx.kappa_of(c);

  LocalBlock blk;
  blk.rows = detail::cell_velocity_dofs(ctx.dofs, c);
  blk.cols = blk.rows;
  int nv = tab.nv;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nv, nv);
  for (int q = 0; q < tab.phi.cols(); ++q)
    M.noalias() += tab.crule->w[q] * map.detJ * tab.phi.col(q) * tab.phi.col(q).transpose();
  blk.A = Eigen::MatrixXd::Zero(2 * nv, 2 * nv);
  blk.A.block(0, 0, nv, nv) = coef * M;
  blk.A.block(nv, nv, nv, nv) = coef * M;
  return blk;
}

// interface slip term on one interface facet
inline LocalBlock local_aI(const FormContext& ctx, int f) {
  const Facet& F = ctx.mesh.facets[f];
  if (F.tag != FacetTag::interface_sd)
    throw std::invalid_argument("local_aI: not an interface facet");
  const auto& tab = ctx.tab;
  FacetGeometry g = facet_geometry(ctx.mesh, f);
  double coef = ctx.params.alpha * ctx.params.mu / std::sqrt(ctx.kappa_of(F.cell1));
  Eigen::Matrix2d Pt = Eigen::Matrix2d::Identity() - g.normal * g.normal.transpose();

  LocalBlock blk;
  blk.rows = detail::facet_velocity_dofs(ctx.dofs, f);
  blk.cols = blk.rows;
  int nf = tab.nf;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf, nf);
  for (int q = 0; q < tab.eL.cols(); ++q)
    M.noalias() += tab.erule->w[q] * g.length * tab.eL.col(q) * tab.eL.col(q).transpose();
  blk.A = Eigen::MatrixXd::Zero(2 * nf, 2 * nf);
  for (int cc = 0; cc < 2; ++cc)
    for (int dd = 0; dd < 2; ++dd) blk.A.block(dd * nf, cc * nf, nf, nf) = coef * Pt(dd, cc) * M;
  return blk;
}

// lagged convection block of one free-flow cell (cell + trace upwind terms)
inline LocalBlock local_th(const FormContext& ctx, int c, const Eigen::VectorXd& w) {
  const auto& tab = ctx.tab;
  const Mesh& mesh = ctx.mesh;
  const int nv = tab.nv, nf = tab.nf;

  auto v = mesh.cell_verts(c);
  AffineMap map(v[0], v[1], v[2]);
  detail::CellGrad g(tab.dphix, tab.dphiy, map);

  LocalBlock blk;
  blk.rows = detail::s_momentum_dofs(mesh, ctx.dofs, c);
  blk.cols = blk.rows;
  const int N = static_cast<int>(blk.rows.size());
  blk.A = Eigen::MatrixXd::Zero(N, N);

  Eigen::MatrixXd wq;
  detail::eval_velocity_table(ctx.dofs, w, c, tab.phi, wq);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nv, nv);
  for (int q = 0; q < tab.phi.cols(); ++q) {
    double wt = tab.crule->w[q] * map.detJ;
    Eigen::VectorXd wg = wq(0, q) * g.dx.col(q) + wq(1, q) * g.dy.col(q);
    C.noalias() += wt * wg * tab.phi.col(q).transpose();  // (w . grad phi_i) phi_j
  }
  blk.A.block(0, 0, nv, nv) = -C;
  blk.A.block(nv, nv, nv, nv) = -C;

  const int nqe = static_cast<int>(tab.erule->s.size());
  for (int e = 0; e < 3; ++e) {
    int f = mesh.cell_facet[c][e];
    int o = mesh.edge_forward[c][e] ? 0 : 1;
    FacetGeometry fg = facet_geometry(mesh, f);
    double sgn = (mesh.facets[f].cell0 == c) ? 1.0 : -1.0;
    Eigen::Vector2d n = sgn * fg.normal;
    const Eigen::MatrixXd& tphi = tab.tphi[e][o];
    Eigen::MatrixXd wt;
    detail::eval_velocity_table(ctx.dofs, w, c, tphi, wt);
    const int ub = 2 * nv + 2 * nf * e;
    // On the stress-outflow boundary the trace rows carry the traction
    // balance, not an upwind flux balance, so the facet test rows are
    // dropped there. The cell test rows keep the full one-sided flux.
    const bool vbar_rows = mesh.facets[f].tag != FacetTag::gamma_s_N;

    for (int q = 0; q < nqe; ++q) {
      double wl = tab.erule->w[q] * fg.length;
      double wn = wt(0, q) * n.x() + wt(1, q) * n.y();
      double a = 0.5 * wn, bu = 0.5 * std::abs(wn);
      Eigen::VectorXd ph = tphi.col(q);
      Eigen::VectorXd L = tab.eL.col(q);
      for (int comp = 0; comp < 2; ++comp) {
        int cu = comp * nv, cb = ub + comp * nf;
        blk.A.block(cu, cu, nv, nv).noalias() += wl * (a + bu) * ph * ph.transpose();
        blk.A.block(cu, cb, nv, nf).noalias() += wl * (a - bu) * ph * L.transpose();
        if (vbar_rows) {
          blk.A.block(cb, cu, nf, nv).noalias() -= wl * (a + bu) * L * ph.transpose();
          blk.A.block(cb, cb, nf, nf).noalias() -= wl * (a - bu) * L * L.transpose();
        }
      }
    }
  }
  return blk;
}

// interface part of the convection form, <(w.n) ubar, vbar>, w from the
// free-flow cell trace
inline LocalBlock local_th_interface(const FormContext& ctx, int f,
                                     const Eigen::VectorXd& w) {
  const Facet& F = ctx.mesh.facets[f];
  if (F.tag != FacetTag::interface_sd)
    throw std::invalid_argument("local_th_interface: not an interface facet");
  const auto& tab = ctx.tab;
  int c = F.cell0;
  int e = 0;
  while (ctx.mesh.cell_facet[c][e] != f) ++e;
  int o = ctx.mesh.edge_forward[c][e] ? 0 : 1;
  FacetGeometry g = facet_geometry(ctx.mesh, f);

  Eigen::MatrixXd wt;
  detail::eval_velocity_table(ctx.dofs, w, c, tab.tphi[e][o], wt);

  LocalBlock blk;
  blk.rows = detail::facet_velocity_dofs(ctx.dofs, f);
  blk.cols = blk.rows;
  int nf = tab.nf;
  blk.A = Eigen::MatrixXd::Zero(2 * nf, 2 * nf);
  for (int q = 0; q < tab.eL.cols(); ++q) {
    double wl = tab.erule->w[q] * g.length;
    double wn = wt(0, q) * g.normal.x() + wt(1, q) * g.normal.y();
    Eigen::VectorXd L = tab.eL.col(q);
    for (int comp = 0; comp < 2; ++comp)
      blk.A.block(comp * nf, comp * nf, nf, nf).noalias() += wl * wn * L * L.transpose();
  }
  return blk;
}

// time-derivative mass block of one free-flow cell
inline LocalBlock local_mass(const FormContext& ctx, int c) {
  const auto& tab = ctx.tab;
  auto v = ctx.mesh.cell_verts(c);
  AffineMap map(v[0], v[1], v[2]);
  LocalBlock blk;
  blk.rows = detail::cell_velocity_dofs(ctx.dofs, c);
  blk.cols = blk.rows;
  int nv = tab.nv;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nv, nv);
  for (int q = 0; q < tab.phi.cols(); ++q)
    M.noalias() += tab.crule->w[q] * map.detJ * tab.phi.col(q) * tab.phi.col(q).transpose();
  blk.A = Eigen::MatrixXd::Zero(2 * nv, 2 * nv);
  blk.A.block(0, 0, nv, nv) = M;
  blk.A.block(nv, nv, nv, nv) = M;
  return blk;
}

// pressure rows of one cell: -(q, div v)_K plus facet moments <qbar, v.n>
inline LocalBlock local_bh(const FormContext& ctx, int c) {
  const auto& tab = ctx.tab;
  const Mesh& mesh = ctx.mesh;
  const DofSystem& d = ctx.dofs;
  const int nv = tab.nv, np = tab.np, nf = tab.nf;
  const bool s_cell = mesh.subdomain[c] == 0;

  auto v = mesh.cell_verts(c);
  AffineMap map(v[0], v[1], v[2]);
  detail::CellGrad g(tab.dphix, tab.dphiy, map);

  LocalBlock blk;
  blk.cols = detail::cell_velocity_dofs(d, c);
  for (int i = 0; i < np; ++i) blk.rows.push_back(d.p_dof(c, i));
  for (int e = 0; e < 3; ++e) {
    int f = mesh.cell_facet[c][e];
    for (int i = 0; i < nf; ++i)
      blk.rows.push_back(s_cell ? d.psbar_dof(f, i) : d.pdbar_dof(f, i));
  }
  blk.A = Eigen::MatrixXd::Zero(np + 3 * nf, 2 * nv);

  for (int q = 0; q < tab.phi.cols(); ++q) {
    double wt = tab.crule->w[q] * map.detJ;
    blk.A.block(0, 0, np, nv).noalias() -= wt * tab.psi.col(q) * g.dx.col(q).transpose();
    blk.A.block(0, nv, np, nv).noalias() -= wt * tab.psi.col(q) * g.dy.col(q).transpose();
  }

  const int nqe = static_cast<int>(tab.erule->s.size());
  for (int e = 0; e < 3; ++e) {
    int f = mesh.cell_facet[c][e];
    int o = mesh.edge_forward[c][e] ? 0 : 1;
    FacetGeometry fg = facet_geometry(mesh, f);
    double sgn = (mesh.facets[f].cell0 == c) ? 1.0 : -1.0;
    Eigen::Vector2d n = sgn * fg.normal;
    const Eigen::MatrixXd& tphi = tab.tphi[e][o];
    for (int q = 0; q < nqe; ++q) {
      double wl = tab.erule->w[q] * fg.length;
      Eigen::VectorXd L = tab.eL.col(q);
      blk.A.block(np + e * nf, 0, nf, nv).noalias() +=
          wl * n.x() * L * tphi.col(q).transpose();
      blk.A.block(np + e * nf, nv, nf, nv).noalias() +=
          wl * n.y() * L * tphi.col(q).transpose();
    }
  }
  return blk;
}

// interface coupling rows: -<qbar^j, vbar . n^j> for both sides
inline LocalBlock local_bh_interface(const FormContext& ctx, int f) {
  const Facet& F = ctx.mesh.facets[f];
  if (F.tag != FacetTag::interface_sd)
    throw std::invalid_argument("local_bh_interface: not an interface facet");
  const auto& tab = ctx.tab;
  const DofSystem& d = ctx.dofs;
  FacetGeometry g = facet_geometry(ctx.mesh, f);
  int nf = tab.nf;

  LocalBlock blk;
  blk.cols = detail::facet_velocity_dofs(d, f);
  for (int i = 0; i < nf; ++i) blk.rows.push_back(d.psbar_dof(f, i));
  for (int i = 0; i < nf; ++i) blk.rows.push_back(d.pdbar_dof(f, i));
  blk.A = Eigen::MatrixXd::Zero(2 * nf, 2 * nf);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf, nf);
  for (int q = 0; q < tab.eL.cols(); ++q)
    M.noalias() += tab.erule->w[q] * g.length * tab.eL.col(q) * tab.eL.col(q).transpose();
  // n^s is the canonical normal, n^d its negative
  for (int comp = 0; comp < 2; ++comp) {
    blk.A.block(0, comp * nf, nf, nf) = -g.normal(comp) * M;
    blk.A.block(nf, comp * nf, nf, nf) = g.normal(comp) * M;
  }
  return blk;
}

// stress-outflow coupling rows: -<qbar^s, vbar . n> on a gamma_s_N facet.
// Pushed with its transpose this puts the trace pressure into the trace
// momentum balance and ties u . n to ubar . n through the qbar rows.
inline LocalBlock local_bh_outflow(const FormContext& ctx, int f) {
  const Facet& F = ctx.mesh.facets[f];
  if (F.tag != FacetTag::gamma_s_N)
    throw std::invalid_argument("local_bh_outflow: not an outflow facet");
  const auto& tab = ctx.tab;
  const DofSystem& d = ctx.dofs;
  FacetGeometry g = facet_geometry(ctx.mesh, f);  // boundary: normal is outward
  int nf = tab.nf;

  LocalBlock blk;
  blk.cols = detail::facet_velocity_dofs(d, f);
  for (int i = 0; i < nf; ++i) blk.rows.push_back(d.psbar_dof(f, i));
  blk.A = Eigen::MatrixXd::Zero(nf, 2 * nf);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf, nf);
  for (int q = 0; q < tab.eL.cols(); ++q)
    M.noalias() += tab.erule->w[q] * g.length * tab.eL.col(q) * tab.eL.col(q).transpose();
  for (int comp = 0; comp < 2; ++comp)
    blk.A.block(0, comp * nf, nf, nf) = -g.normal(comp) * M;
  return blk;
}

// volume loads of one cell at time t
inline LocalVec local_rhs_cell(const FormContext& ctx, int c, const ProblemData& data,
                               double t) {
  const auto& tab = ctx.tab;
  auto v = ctx.mesh.cell_verts(c);
  AffineMap map(v[0], v[1], v[2]);
  LocalVec out;
  if (ctx.mesh.subdomain[c] == 0) {
    out.rows = detail::cell_velocity_dofs(ctx.dofs, c);
    out.b = Eigen::VectorXd::Zero(2 * tab.nv);
    if (data.f_s)
      for (int q = 0; q < tab.phi.cols(); ++q) {
        double wt = tab.crule->w[q] * map.detJ;
        Eigen::Vector2d fv = data.f_s(map.to_physical(tab.crule->p[q]), t);
        out.b.segment(0, tab.nv).noalias() += wt * fv.x() * tab.phi.col(q);
        out.b.segment(tab.nv, tab.nv).noalias() += wt * fv.y() * tab.phi.col(q);
      }
  } else {
    for (int i = 0; i < tab.np; ++i) out.rows.push_back(ctx.dofs.p_dof(c, i));
    out.b = Eigen::VectorXd::Zero(tab.np);
    if (data.f_d)
      for (int q = 0; q < tab.psi.cols(); ++q) {
        double wt = tab.crule->w[q] * map.detJ;
        out.b.noalias() += wt * data.f_d(map.to_physical(tab.crule->p[q]), t) * tab.psi.col(q);
      }
  }
  return out;
}

// boundary and interface data rows of one facet at time t
inline LocalVec local_rhs_facet(const FormContext& ctx, int f, const ProblemData& data,
                                double t) {
  const auto& tab = ctx.tab;
  const DofSystem& d = ctx.dofs;
  const Facet& F = ctx.mesh.facets[f];
  FacetGeometry g = facet_geometry(ctx.mesh, f);
  const int nf = tab.nf;
  LocalVec out;

  auto edge_points = [&](auto&& fn) {
    Eigen::Vector2d a = ctx.mesh.verts[F.v[0]], b = ctx.mesh.verts[F.v[1]];
    for (int q = 0; q < static_cast<int>(tab.erule->s.size()); ++q) {
      double s = tab.erule->s[q];
      fn(q, tab.erule->w[q] * g.length, Eigen::Vector2d(a + s * (b - a)));
    }
  };

  switch (F.tag) {
    case FacetTag::gamma_s_N: {
      // traction datum against the trace test functions; the qbar row has no
      // datum, it ties u . n to ubar . n
      if (!data.neumann_s) break;
      out.rows = detail::facet_velocity_dofs(d, f);
      out.b = Eigen::VectorXd::Zero(2 * nf);
      edge_points([&](int q, double wl, const Eigen::Vector2d& x) {
        Eigen::VectorXd L = tab.eL.col(q);
        Eigen::Vector2d gn = data.neumann_s(x, t, g.normal);
        out.b.segment(0, nf).noalias() += wl * gn.x() * L;
        out.b.segment(nf, nf).noalias() += wl * gn.y() * L;
      });
      break;
    }
    case FacetTag::gamma_s_D: {
      for (int i = 0; i < nf; ++i) out.rows.push_back(d.psbar_dof(f, i));
      out.b = Eigen::VectorXd::Zero(nf);
      if (data.dirichlet_us)
        edge_points([&](int q, double wl, const Eigen::Vector2d& x) {
          out.b.noalias() +=
              wl * data.dirichlet_us(x, t).dot(g.normal) * tab.eL.col(q);
        });
      break;
    }
    case FacetTag::gamma_d_N: {
      for (int i = 0; i < nf; ++i) out.rows.push_back(d.pdbar_dof(f, i));
      out.b = Eigen::VectorXd::Zero(nf);
      if (data.ud_n)
        edge_points([&](int q, double wl, const Eigen::Vector2d& x) {
          out.b.noalias() += wl * data.ud_n(x, t, g.normal) * tab.eL.col(q);
        });
      break;
    }
    case FacetTag::interface_sd: {
      out.rows = detail::facet_velocity_dofs(d, f);
      for (int i = 0; i < nf; ++i) out.rows.push_back(d.pdbar_dof(f, i));
      out.b = Eigen::VectorXd::Zero(3 * nf);
      Eigen::Matrix2d Pt = Eigen::Matrix2d::Identity() - g.normal * g.normal.transpose();
      edge_points([&](int q, double wl, const Eigen::Vector2d& x) {
        Eigen::VectorXd L = tab.eL.col(q);
        if (data.m_p) {
          double mp = data.m_p(x, t, g.normal);
          out.b.segment(0, nf).noalias() -= wl * mp * g.normal.x() * L;
          out.b.segment(nf, nf).noalias() -= wl * mp * g.normal.y() * L;
        }
        if (data.m_e_t) {
          Eigen::Vector2d me = Pt * data.m_e_t(x, t, g.normal);
          out.b.segment(0, nf).noalias() -= wl * me.x() * L;
          out.b.segment(nf, nf).noalias() -= wl * me.y() * L;
        }
        if (data.m_u)
          out.b.segment(2 * nf, nf).noalias() += wl * data.m_u(x, t, g.normal) * L;
      });
      break;
    }
    default:
      break;  // interior facets carry no data
  }
  return out;
}

}  // namespace hdgns
