#pragma once

// Two-subdomain structured triangle meshes. The free-flow region sits above
// the porous region; they share a polyline interface. Grids are matching
// across the interface, every quad is split along the same diagonal, and a
// non-flat interface is realized by vertically shearing the rows between the
// interface polyline and the outer boundary.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdgns {

enum class FacetTag {
  interior_s,
  interior_d,
  interface_sd,
  gamma_s_D,
  gamma_s_N,
  gamma_d_D,
  gamma_d_N
};

inline bool is_s_side(FacetTag t) {
  return t == FacetTag::interior_s || t == FacetTag::interface_sd ||
         t == FacetTag::gamma_s_D || t == FacetTag::gamma_s_N;
}
inline bool is_d_side(FacetTag t) {
  return t == FacetTag::interior_d || t == FacetTag::interface_sd ||
         t == FacetTag::gamma_d_D || t == FacetTag::gamma_d_N;
}
inline bool is_boundary(FacetTag t) {
  return t == FacetTag::gamma_s_D || t == FacetTag::gamma_s_N ||
         t == FacetTag::gamma_d_D || t == FacetTag::gamma_d_N;
}

// predicate arguments: facet midpoint, owning subdomain (0 free flow, 1 porous)
using BoundaryRule =
    std::pair<std::function<bool(const Eigen::Vector2d&, int)>, FacetTag>;

struct DomainSpec {
  std::array<double, 4> rect_s{0.0, 1.0, 0.0, 0.5};    // x0, x1, y0, y1
  std::array<double, 4> rect_d{0.0, 1.0, -0.5, 0.0};
  std::vector<Eigen::Vector2d> interface_polyline;     // empty: flat shared edge
  std::vector<BoundaryRule> boundary_rules;
};

// Domain of the coupled-channel convergence setup: Dirichlet on the left and
// top of the free-flow box, stress outflow on its right, pressure Dirichlet on
// the porous bottom, impermeable porous side walls.
inline DomainSpec coupled_channel_domain() {
  DomainSpec spec;
  const double tol = 1e-9;
  spec.boundary_rules = {
      {[tol](const Eigen::Vector2d& x, int sub) {
         return sub == 0 && (std::abs(x.x()) < tol || std::abs(x.y() - 0.5) < tol);
       },
       FacetTag::gamma_s_D},
      {[tol](const Eigen::Vector2d& x, int sub) {
         return sub == 0 && std::abs(x.x() - 1.0) < tol;
       },
       FacetTag::gamma_s_N},
      {[tol](const Eigen::Vector2d& x, int sub) {
         return sub == 1 && std::abs(x.y() + 0.5) < tol;
       },
       FacetTag::gamma_d_D},
      {[tol](const Eigen::Vector2d& x, int sub) {
         return sub == 1 && (std::abs(x.x()) < tol || std::abs(x.x() - 1.0) < tol);
       },
       FacetTag::gamma_d_N}};
  return spec;
}

// Domain of the heterogeneous subsurface-flow setup: velocity prescribed on
// the whole free-flow boundary, pressure pinned on the porous bottom. The
// default interface polyline is an illustrative three-segment approximation;
// its left end sits at y=-0.1 where the standard inflow profile vanishes.
inline DomainSpec subsurface_domain(
    std::vector<Eigen::Vector2d> polyline = {}) {
  DomainSpec spec;
  const double tol = 1e-9;
  if (polyline.empty())
    polyline = {{0.0, -0.1}, {0.25, 0.05}, {0.75, -0.08}, {1.0, 0.0}};
  spec.interface_polyline = std::move(polyline);
  spec.boundary_rules = {
      {[](const Eigen::Vector2d&, int sub) { return sub == 0; },
       FacetTag::gamma_s_D},
      {[tol](const Eigen::Vector2d& x, int sub) {
         return sub == 1 && std::abs(x.y() + 0.5) < tol;
       },
       FacetTag::gamma_d_D},
      {[tol](const Eigen::Vector2d& x, int sub) {
         return sub == 1 && std::abs(x.y() + 0.5) >= tol;
       },
       FacetTag::gamma_d_N}};
  return spec;
}

struct Facet {
  std::array<int, 2> v{-1, -1};  // canonical order: v[0] < v[1]
  int cell0 = -1;                // interface: always the free-flow cell
  int cell1 = -1;                // -1 on the boundary
  FacetTag tag = FacetTag::interior_s;
};

struct Mesh {
  std::vector<Eigen::Vector2d> verts;
  std::vector<std::array<int, 3>> cells;  // ccw
  std::vector<int> subdomain;             // 0 free flow (s), 1 porous (d)
  std::vector<Facet> facets;
  std::vector<std::array<int, 3>> cell_facet;     // facet id of local edge (v_i, v_{i+1})
  std::vector<std::array<bool, 3>> edge_forward;  // local edge runs v[0] -> v[1]
  std::vector<double> h_cell;
  double h_max = 0.0;
  int n_cells_s = 0, n_cells_d = 0;
  bool structured = false;
  DomainSpec spec;
  int ny = 0, nx = 0;

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_facets() const { return static_cast<int>(facets.size()); }

  std::array<Eigen::Vector2d, 3> cell_verts(int c) const {
    return {verts[cells[c][0]], verts[cells[c][1]], verts[cells[c][2]]};
  }
  double cell_area(int c) const {
    auto v = cell_verts(c);
    return 0.5 * ((v[1] - v[0]).x() * (v[2] - v[0]).y() -
                  (v[1] - v[0]).y() * (v[2] - v[0]).x());
  }
  double facet_length(int f) const {
    return (verts[facets[f].v[1]] - verts[facets[f].v[0]]).norm();
  }
};

struct FacetGeometry {
  double length = 0.0;
  Eigen::Vector2d normal;    // unit, outward from cell0 (interface: s into d)
  Eigen::Vector2d tangent;   // unit, along v[0] -> v[1]
  Eigen::Vector2d midpoint;
};

inline FacetGeometry facet_geometry(const Mesh& mesh, int f) {
  const Facet& F = mesh.facets[f];
  Eigen::Vector2d a = mesh.verts[F.v[0]], b = mesh.verts[F.v[1]];
  FacetGeometry g;
  g.length = (b - a).norm();
  g.tangent = (b - a) / g.length;
  g.midpoint = 0.5 * (a + b);
  g.normal = Eigen::Vector2d(g.tangent.y(), -g.tangent.x());
  // orient away from cell0
  auto cv = mesh.cell_verts(F.cell0);
  Eigen::Vector2d centroid = (cv[0] + cv[1] + cv[2]) / 3.0;
  if (g.normal.dot(g.midpoint - centroid) < 0.0) g.normal = -g.normal;
  return g;
}

namespace detail {

inline double polyline_y(const std::vector<Eigen::Vector2d>& poly, double x) {
  if (x <= poly.front().x()) return poly.front().y();
  for (size_t i = 1; i < poly.size(); ++i) {
    if (x <= poly[i].x() + 1e-14) {
      double t = (x - poly[i - 1].x()) / (poly[i].x() - poly[i - 1].x());
      return (1.0 - t) * poly[i - 1].y() + t * poly[i].y();
    }
  }
  return poly.back().y();
}

}  // namespace detail

inline Mesh build_structured(const DomainSpec& spec, int ny) {
  if (ny < 1) throw std::invalid_argument("build_structured: ny must be >= 1");
  const double x0 = spec.rect_s[0], x1 = spec.rect_s[1];
  const double y_top = spec.rect_s[3], y_bot = spec.rect_d[2];
  const double y_if = spec.rect_s[2];
  if (std::abs(spec.rect_d[0] - x0) > 1e-12 || std::abs(spec.rect_d[1] - x1) > 1e-12 ||
      std::abs(spec.rect_d[3] - y_if) > 1e-12)
    throw std::invalid_argument("build_structured: subdomain rectangles must share an edge");
  const double hs = y_top - y_if, hd = y_if - y_bot;
  if (hs <= 0 || hd <= 0 || std::abs(hs - hd) > 1e-12)
    throw std::invalid_argument("build_structured: subdomains must have equal positive heights");

  const int nx = static_cast<int>(std::llround(ny * (x1 - x0) / hs));
  if (nx < 1) throw std::invalid_argument("build_structured: resolution gives nx < 1");
  const double dx = (x1 - x0) / nx;

  std::vector<Eigen::Vector2d> poly = spec.interface_polyline;
  if (poly.empty()) poly = {{x0, y_if}, {x1, y_if}};
  if (std::abs(poly.front().x() - x0) > 1e-12 || std::abs(poly.back().x() - x1) > 1e-12)
    throw std::invalid_argument("build_structured: interface polyline must span the shared edge");
  for (size_t i = 1; i < poly.size(); ++i) {
    if (poly[i].x() <= poly[i - 1].x())
      throw std::invalid_argument("build_structured: polyline x must be increasing");
    double r = (poly[i].x() - x0) / dx;
    if (std::abs(r - std::llround(r)) > 1e-9)
      throw std::invalid_argument(
          "build_structured: polyline vertex not representable on the grid");
  }

  Mesh mesh;
  mesh.structured = true;
  mesh.spec = spec;
  mesh.ny = ny;
  mesh.nx = nx;

  // vertex layout: interface row, then s rows bottom-up, then d rows top-down
  auto vid = [&](int i, int j, bool s_side) {
    if (j == 0) return i;
    int base = (nx + 1) * (1 + (s_side ? 0 : ny)) ;
    return base + (j - 1) * (nx + 1) + i;
  };
  mesh.verts.resize((nx + 1) * (2 * ny + 1));
  for (int i = 0; i <= nx; ++i) {
    double x = x0 + i * dx;
    double g = detail::polyline_y(poly, x);
    mesh.verts[vid(i, 0, true)] = {x, g};
    for (int j = 1; j <= ny; ++j) {
      double fj = static_cast<double>(j) / ny;
      mesh.verts[vid(i, j, true)] = {x, g + fj * (y_top - g)};
      mesh.verts[vid(i, j, false)] = {x, g - fj * (g - y_bot)};
    }
  }

  // cells, free-flow block first; both subdomains use the lower-left to
  // upper-right diagonal
  auto add_quad = [&](int ll, int lr, int ur, int ul, int sub) {
    mesh.cells.push_back({ll, lr, ur});
    mesh.subdomain.push_back(sub);
    mesh.cells.push_back({ll, ur, ul});
    mesh.subdomain.push_back(sub);
  };
  for (int j = 1; j <= ny; ++j)
    for (int i = 0; i < nx; ++i)
      add_quad(vid(i, j - 1, true), vid(i + 1, j - 1, true), vid(i + 1, j, true),
               vid(i, j, true), 0);
  for (int j = 1; j <= ny; ++j)
    for (int i = 0; i < nx; ++i)
      add_quad(vid(i, j, false), vid(i + 1, j, false), vid(i + 1, j - 1, false),
               vid(i, j - 1, false), 1);
  mesh.n_cells_s = mesh.n_cells_d = 2 * nx * ny;

  // facets
  std::map<std::array<int, 2>, int> facet_of;
  mesh.cell_facet.resize(mesh.cells.size());
  mesh.edge_forward.resize(mesh.cells.size());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int e = 0; e < 3; ++e) {
      int a = mesh.cells[c][e], b = mesh.cells[c][(e + 1) % 3];
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      auto [it, inserted] = facet_of.try_emplace(key, mesh.n_facets());
      if (inserted) {
        Facet F;
        F.v = key;
        F.cell0 = c;
        mesh.facets.push_back(F);
      } else {
        mesh.facets[it->second].cell1 = c;
      }
      mesh.cell_facet[c][e] = it->second;
      mesh.edge_forward[c][e] = (a == key[0]);
    }
  }

  for (auto& F : mesh.facets) {
    if (F.cell1 >= 0) {
      int s0 = mesh.subdomain[F.cell0], s1 = mesh.subdomain[F.cell1];
      if (s0 == s1) {
        F.tag = s0 == 0 ? FacetTag::interior_s : FacetTag::interior_d;
      } else {
        F.tag = FacetTag::interface_sd;
        if (s0 != 0) std::swap(F.cell0, F.cell1);  // keep the s cell first
      }
    } else {
      Eigen::Vector2d mid = 0.5 * (mesh.verts[F.v[0]] + mesh.verts[F.v[1]]);
      int sub = mesh.subdomain[F.cell0];
      int matches = 0;
      for (const auto& [pred, tag] : spec.boundary_rules)
        if (pred(mid, sub)) {
          if (matches++ == 0) F.tag = tag;
        }
      if (matches != 1)
        throw std::runtime_error(
            "build_structured: boundary rules must match each exterior facet exactly once");
      if ((sub == 0) != is_s_side(F.tag) || is_boundary(F.tag) == false)
        throw std::runtime_error("build_structured: boundary rule tag inconsistent with subdomain");
    }
  }

  // geometric validation
  mesh.h_cell.resize(mesh.cells.size());
  mesh.h_max = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double area = mesh.cell_area(c);
    auto v = mesh.cell_verts(c);
    double e0 = (v[1] - v[0]).norm(), e1 = (v[2] - v[1]).norm(), e2 = (v[0] - v[2]).norm();
    double h = std::max({e0, e1, e2});
    mesh.h_cell[c] = h;
    mesh.h_max = std::max(mesh.h_max, h);
    if (area <= 1e-14 * h * h)
      throw std::runtime_error(
          "build_structured: interface displacement produced a degenerate or inverted cell");
    double aspect = h * (e0 + e1 + e2) / (4.0 * area);  // h / (2 * inradius)
    if (aspect > 4.0)
      throw std::runtime_error("build_structured: shape regularity violated (aspect > 4)");
  }
  return mesh;
}

inline Mesh refine(const Mesh& mesh) {
  if (!mesh.structured)
    throw std::invalid_argument("refine: mesh has no structured provenance");
  return build_structured(mesh.spec, 2 * mesh.ny);
}

}  // namespace hdgns
