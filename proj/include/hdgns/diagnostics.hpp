#pragma once

// Post-processing: pointwise conservation checks of the discrete velocity,
// error norms against analytic fields, interface flux balance, and
// convergence-rate arithmetic.

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdgns/forms.hpp"
#include "hdgns/scenarios.hpp"
#include "hdgns/solver.hpp"

namespace hdgns {

inline int error_quadrature_degree(int k) { return cell_quadrature_degree(k) + 2; }

// worst relative violation of the structure properties of u_h:
//   div_s            pointwise divergence on free-flow cells
//   div_d            -div u_h against the projected porous source
//   normal_jump      normal-trace jump across every interior facet
//   interface_match  cell normal trace against the facet velocity, both sides
//   boundary_normal  u.n against the projected datum on exterior facets
// All entries are scaled by max(1, sup |u_h|).
struct ConservationReport {
  double div_s = 0, div_d = 0, normal_jump = 0, interface_match = 0,
         boundary_normal = 0;
  double scale = 1;

  double worst() const {
    return std::max({div_s, div_d, normal_jump, interface_match, boundary_normal});
  }
};

inline int local_edge_of(const Mesh& mesh, int c, int f) {
  for (int e = 0; e < 3; ++e)
    if (mesh.cell_facet[c][e] == f) return e;
  throw std::logic_error("facet does not belong to cell");
}

inline ConservationReport check_conservation(const FormContext& ctx,
                                             const ProblemData& data,
                                             const Eigen::VectorXd& state, double t) {
  const Mesh& mesh = ctx.mesh;
  const DofSystem& d = ctx.dofs;
  const int k = d.k;
  ConservationReport rep;

  const TriangleRule& cr = triangle_quadrature(error_quadrature_degree(k));
  // data projections must use the assembly quadrature: the scheme pins the
  // traces to exactly those projections
  const EdgeRule& er = edge_quadrature(facet_quadrature_degree(k));
  const EdgeBasis& eb = edge_basis(k);

  // velocity magnitude scale
  double umax = 0;
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (const auto& p : cr.p)
      umax = std::max(umax, eval_cell_velocity(d, state, c, p).norm());
  rep.scale = std::max(1.0, umax);

  // projected porous source, degree k-1
  std::vector<Eigen::VectorXd> pf(mesh.n_cells());
  if (data.f_d) {
    for (int c = 0; c < mesh.n_cells(); ++c) {
      if (mesh.subdomain[c] != 1) continue;
      auto v = mesh.cell_verts(c);
      AffineMap map(v[0], v[1], v[2]);
      const CellBasis& pb = cell_basis(k - 1);
      Eigen::VectorXd coef = Eigen::VectorXd::Zero(pb.ndof);
      const TriangleRule& pr = triangle_quadrature(cell_quadrature_degree(k));
      for (size_t q = 0; q < pr.p.size(); ++q)
        coef += pr.w[q] * data.f_d(map.to_physical(pr.p[q]), t) * pb.eval(pr.p[q]);
      pf[c] = coef;
    }
  }

  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    const CellBasis& pb = cell_basis(k - 1);
    for (const auto& p : cr.p) {
      Eigen::Matrix2d G = eval_cell_velocity_grad(d, state, c, p, map);
      double div = G(0, 0) + G(1, 1);
      if (mesh.subdomain[c] == 0) {
        rep.div_s = std::max(rep.div_s, std::abs(div));
      } else {
        double src = pf[c].size() ? pf[c].dot(pb.eval(p)) : 0.0;
        rep.div_d = std::max(rep.div_d, std::abs(-div - src));
      }
    }
  }

  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& F = mesh.facets[f];
    FacetGeometry g = facet_geometry(mesh, f);

    // facet datum projected onto the facet polynomial space
    Eigen::VectorXd datum;
    bool has_datum = false;
    auto project_datum = [&](auto&& fn) {
      datum = Eigen::VectorXd::Zero(eb.ndof);
      Eigen::Vector2d a = mesh.verts[F.v[0]], b = mesh.verts[F.v[1]];
      for (size_t q = 0; q < er.s.size(); ++q) {
        Eigen::Vector2d x = a + er.s[q] * (b - a);
        datum += er.w[q] * fn(x) * eb.eval(er.s[q]);
      }
      has_datum = true;
    };
    if (F.tag == FacetTag::gamma_s_D) {
      if (data.dirichlet_us)
        project_datum([&](const Eigen::Vector2d& x) {
          return data.dirichlet_us(x, t).dot(g.normal);
        });
      else
        project_datum([](const Eigen::Vector2d&) { return 0.0; });
    } else if (F.tag == FacetTag::gamma_d_N) {
      if (data.ud_n)
        project_datum(
            [&](const Eigen::Vector2d& x) { return data.ud_n(x, t, g.normal); });
      else
        project_datum([](const Eigen::Vector2d&) { return 0.0; });
    } else if (F.tag == FacetTag::interface_sd && data.m_u) {
      // prescribed normal jump across the interface (zero for physical runs)
      project_datum([&](const Eigen::Vector2d& x) { return data.m_u(x, t, g.normal); });
    }

    for (size_t q = 0; q < er.s.size(); ++q) {
      double s = er.s[q];
      Eigen::VectorXd L = eb.eval(s);
      auto side_un = [&](int cell) {
        Eigen::Vector2d ref = ref_edge_point(mesh, cell, local_edge_of(mesh, cell, f), s);
        return eval_cell_velocity(d, state, cell, ref).dot(g.normal);
      };
      switch (F.tag) {
        case FacetTag::interior_s:
        case FacetTag::interior_d:
          rep.normal_jump = std::max(
              rep.normal_jump, std::abs(side_un(F.cell0) - side_un(F.cell1)));
          break;
        case FacetTag::interface_sd: {
          double un_bar = eval_facet_velocity(d, state, f, s).dot(g.normal);
          double jump = has_datum ? datum.dot(L) : 0.0;
          // free-flow side carries the trace; the porous side is offset by the
          // prescribed jump
          rep.interface_match =
              std::max(rep.interface_match, std::abs(side_un(F.cell0) - un_bar));
          rep.interface_match = std::max(
              rep.interface_match, std::abs(side_un(F.cell1) - (un_bar - jump)));
          rep.normal_jump = std::max(
              rep.normal_jump, std::abs(side_un(F.cell0) - side_un(F.cell1) - jump));
          break;
        }
        case FacetTag::gamma_s_N: {
          // stress outflow: the cell normal trace follows the facet unknown
          double un_bar = eval_facet_velocity(d, state, f, s).dot(g.normal);
          rep.boundary_normal = std::max(rep.boundary_normal,
                                         std::abs(side_un(F.cell0) - un_bar));
          break;
        }
        default:
          if (has_datum)
            rep.boundary_normal = std::max(
                rep.boundary_normal, std::abs(side_un(F.cell0) - datum.dot(L)));
          break;
      }
    }
  }

  rep.div_s /= rep.scale;
  rep.div_d /= rep.scale;
  rep.normal_jump /= rep.scale;
  rep.interface_match /= rep.scale;
  rep.boundary_normal /= rep.scale;
  return rep;
}

// net interface inflow against net porous boundary outflow; both vanish
// together when the porous source is zero
struct FluxBalance {
  double interface_influx = 0;   // integral of ubar . n over the interface
  double porous_outflux = 0;     // integral of u . n_out over the porous boundary
  double imbalance() const {
    return std::abs(interface_influx - porous_outflux) /
           std::max(1.0, std::abs(interface_influx));
  }
};

inline FluxBalance interface_flux_balance(const FormContext& ctx,
                                          const Eigen::VectorXd& state) {
  const Mesh& mesh = ctx.mesh;
  const EdgeRule& er = *ctx.tab.erule;
  FluxBalance fb;
  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& F = mesh.facets[f];
    FacetGeometry g = facet_geometry(mesh, f);
    if (F.tag == FacetTag::interface_sd) {
      for (size_t q = 0; q < er.s.size(); ++q)
        fb.interface_influx +=
            er.w[q] * g.length *
            eval_facet_velocity(ctx.dofs, state, f, er.s[q]).dot(g.normal);
    } else if (F.tag == FacetTag::gamma_d_D || F.tag == FacetTag::gamma_d_N) {
      int e = local_edge_of(mesh, F.cell0, f);
      for (size_t q = 0; q < er.s.size(); ++q) {
        Eigen::Vector2d ref = ref_edge_point(mesh, F.cell0, e, er.s[q]);
        fb.porous_outflux +=
            er.w[q] * g.length *
            eval_cell_velocity(ctx.dofs, state, F.cell0, ref).dot(g.normal);
      }
    }
  }
  return fb;
}

struct ErrorReport {
  double u_l2_s = 0, u_l2_d = 0, u_l2 = 0;
  double p_l2_s = 0, p_l2_d = 0, p_l2 = 0;
  double u_h1_s = 0;   // broken H1 seminorm of the free-flow error
  double u_energy = 0; // sqrt(sum_s |e|_1^2 + |e|_{L2,porous}^2)
};

inline ErrorReport compute_errors(const FormContext& ctx, const ExactSolution& ex,
                                  const Eigen::VectorXd& state, double t) {
  if (!ex.available) throw std::logic_error("no analytic solution for this scenario");
  const Mesh& mesh = ctx.mesh;
  const DofSystem& d = ctx.dofs;
  const TriangleRule& cr = triangle_quadrature(error_quadrature_degree(d.k));
  ErrorReport er;
  double h1 = 0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto v = mesh.cell_verts(c);
    AffineMap map(v[0], v[1], v[2]);
    bool s_cell = mesh.subdomain[c] == 0;
    for (size_t q = 0; q < cr.p.size(); ++q) {
      double w = cr.w[q] * map.detJ;
      Eigen::Vector2d x = map.to_physical(cr.p[q]);
      Eigen::Vector2d uh = eval_cell_velocity(d, state, c, cr.p[q]);
      double ph = eval_cell_pressure(d, state, c, cr.p[q]);
      if (s_cell) {
        Eigen::Vector2d eu = ex.u_s(x, t) - uh;
        double ep = ex.p_s(x, t) - ph;
        er.u_l2_s += w * eu.squaredNorm();
        er.p_l2_s += w * ep * ep;
        Eigen::Matrix2d eg =
            ex.grad_us(x, t) - eval_cell_velocity_grad(d, state, c, cr.p[q], map);
        h1 += w * eg.squaredNorm();
      } else {
        Eigen::Vector2d eu = ex.u_d(x, t) - uh;
        double ep = ex.p_d(x, t) - ph;
        er.u_l2_d += w * eu.squaredNorm();
        er.p_l2_d += w * ep * ep;
      }
    }
  }
  er.u_energy = std::sqrt(h1 + er.u_l2_d);
  er.u_h1_s = std::sqrt(h1);
  er.u_l2 = std::sqrt(er.u_l2_s + er.u_l2_d);
  er.p_l2 = std::sqrt(er.p_l2_s + er.p_l2_d);
  er.u_l2_s = std::sqrt(er.u_l2_s);
  er.u_l2_d = std::sqrt(er.u_l2_d);
  er.p_l2_s = std::sqrt(er.p_l2_s);
  er.p_l2_d = std::sqrt(er.p_l2_d);
  return er;
}

// least-squares unnecessary here: successive-pair rates as usually tabulated
inline std::vector<double> convergence_rates(const std::vector<double>& errors,
                                             const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    throw std::invalid_argument("need matching error/size sequences");
  std::vector<double> r;
  for (size_t i = 0; i + 1 < errors.size(); ++i)
    r.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
  return r;
}

}  // namespace hdgns
