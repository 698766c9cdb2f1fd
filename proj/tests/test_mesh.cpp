#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "hdgns/mesh.hpp"

using namespace hdgns;

TEST_CASE("coarsest channel mesh has expected counts") {
  Mesh m = build_structured(coupled_channel_domain(), 1);
  REQUIRE(m.nx == 2);
  REQUIRE(m.n_cells() == 8);
  REQUIRE(m.n_cells_s == 4);
  REQUIRE(m.n_cells_d == 4);
  REQUIRE(static_cast<int>(m.verts.size()) == 9);
  int n_interface = 0;
  for (const auto& f : m.facets)
    if (f.tag == FacetTag::interface_sd) ++n_interface;
  REQUIRE(n_interface == 2);
  // planar Euler relation, outer face included
  REQUIRE(static_cast<int>(m.verts.size()) - m.n_facets() + m.n_cells() + 1 == 2);
  REQUIRE_THAT(m.h_max, Catch::Matchers::WithinAbs(0.5 * std::sqrt(2.0), 1e-14));
}

TEST_CASE("channel mesh cell count scales like 8 ny^2") {
  for (int ny : {2, 4, 8}) {
    Mesh m = build_structured(coupled_channel_domain(), ny);
    REQUIRE(m.n_cells() == 8 * ny * ny);
    REQUIRE(static_cast<int>(m.verts.size()) - m.n_facets() + m.n_cells() + 1 == 2);
  }
}

TEST_CASE("total area is preserved exactly") {
  for (int ny : {1, 2, 4}) {
    Mesh m = build_structured(coupled_channel_domain(), ny);
    double area = 0;
    for (int c = 0; c < m.n_cells(); ++c) {
      REQUIRE(m.cell_area(c) > 0);
      area += m.cell_area(c);
    }
    REQUIRE_THAT(area, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  for (int ny : {2, 4}) {
    Mesh m = build_structured(subsurface_domain(), ny);
    double area = 0;
    for (int c = 0; c < m.n_cells(); ++c) area += m.cell_area(c);
    REQUIRE_THAT(area, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("facet normals are unit and outward from the first cell") {
  Mesh m = build_structured(coupled_channel_domain(), 2);
  for (int f = 0; f < m.n_facets(); ++f) {
    FacetGeometry g = facet_geometry(m, f);
    REQUIRE_THAT(g.normal.norm(), Catch::Matchers::WithinAbs(1.0, 1e-13));
    auto cv = m.cell_verts(m.facets[f].cell0);
    Eigen::Vector2d centroid = (cv[0] + cv[1] + cv[2]) / 3.0;
    REQUIRE(g.normal.dot(g.midpoint - centroid) > 0);
    if (m.facets[f].tag == FacetTag::interface_sd) {
      // first cell is on the free-flow side, normal points into the porous side
      REQUIRE(m.subdomain[m.facets[f].cell0] == 0);
      REQUIRE(m.subdomain[m.facets[f].cell1] == 1);
      REQUIRE_THAT(g.normal.y(), Catch::Matchers::WithinAbs(-1.0, 1e-13));
    }
  }
}

TEST_CASE("boundary tags partition the channel boundary") {
  Mesh m = build_structured(coupled_channel_domain(), 2);
  std::map<FacetTag, int> count;
  for (const auto& f : m.facets) {
    if (is_boundary(f.tag)) REQUIRE(f.cell1 == -1);
    ++count[f.tag];
  }
  REQUIRE(count[FacetTag::gamma_s_D] == 6);  // left and top of the free-flow box
  REQUIRE(count[FacetTag::gamma_s_N] == 2);  // right outflow
  REQUIRE(count[FacetTag::gamma_d_D] == 4);  // bottom
  REQUIRE(count[FacetTag::gamma_d_N] == 4);  // porous left and right
  REQUIRE(count[FacetTag::interface_sd] == 4);
}

TEST_CASE("refinement doubles resolution and preserves area") {
  Mesh m = build_structured(coupled_channel_domain(), 2);
  Mesh r = refine(m);
  REQUIRE(r.ny == 4);
  REQUIRE(r.n_cells() == 4 * m.n_cells());
  REQUIRE_THAT(r.h_max, Catch::Matchers::WithinAbs(0.5 * m.h_max, 1e-14));
  double area = 0;
  for (int c = 0; c < r.n_cells(); ++c) area += r.cell_area(c);
  REQUIRE_THAT(area, Catch::Matchers::WithinAbs(1.0, 1e-12));

  Mesh ms = build_structured(subsurface_domain(), 2);
  Mesh rs = refine(ms);
  REQUIRE(rs.n_cells() == 4 * ms.n_cells());
  double sarea = 0;
  for (int c = 0; c < rs.n_cells(); ++c) sarea += rs.cell_area(c);
  REQUIRE_THAT(sarea, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("refine requires structured provenance") {
  Mesh m = build_structured(coupled_channel_domain(), 1);
  m.structured = false;
  REQUIRE_THROWS_AS(refine(m), std::invalid_argument);
}

TEST_CASE("default subsurface polyline is honored by the vertex layout") {
  Mesh m = build_structured(subsurface_domain(), 2);
  // interface height midway between the second and third breakpoints
  double y_mid = 0.05 + 0.5 * (-0.08 - 0.05);
  bool found = false;
  for (const auto& v : m.verts)
    if (std::abs(v.x() - 0.5) < 1e-12 && std::abs(v.y() - y_mid) < 1e-12) found = true;
  REQUIRE(found);
  // every interface facet normal points downward-ish (from free flow into porous)
  for (int f = 0; f < m.n_facets(); ++f)
    if (m.facets[f].tag == FacetTag::interface_sd)
      REQUIRE(facet_geometry(m, f).normal.y() < 0);
}

TEST_CASE("subsurface polyline needs grid-representable breakpoints") {
  // ny = 1 puts breakpoints 0.25 and 0.75 off the vertex grid
  REQUIRE_THROWS_AS(build_structured(subsurface_domain(), 1), std::invalid_argument);
}

TEST_CASE("degenerate interface geometry is rejected") {
  std::vector<Eigen::Vector2d> bad = {{0.0, 0.0}, {0.5, -0.5}, {1.0, 0.0}};
  REQUIRE_THROWS_AS(build_structured(subsurface_domain(bad), 2), std::runtime_error);
}

TEST_CASE("cell aspect ratios stay bounded") {
  for (int ny : {2, 4}) {
    Mesh m = build_structured(subsurface_domain(), ny);
    for (int c = 0; c < m.n_cells(); ++c) {
      auto v = m.cell_verts(c);
      double perim = (v[1] - v[0]).norm() + (v[2] - v[1]).norm() + (v[0] - v[2]).norm();
      double aspect = m.h_cell[c] * perim / (4.0 * m.cell_area(c));
      REQUIRE(aspect <= 4.0);
    }
  }
}

TEST_CASE("facet endpoints are sorted and shared consistently") {
  Mesh m = build_structured(coupled_channel_domain(), 2);
  for (const auto& f : m.facets) {
    REQUIRE(f.v[0] < f.v[1]);
    if (f.cell1 >= 0) REQUIRE(f.cell0 != f.cell1);
  }
  // each cell's local edges resolve back to this cell
  for (int c = 0; c < m.n_cells(); ++c)
    for (int e = 0; e < 3; ++e) {
      const Facet& F = m.facets[m.cell_facet[c][e]];
      REQUIRE((F.cell0 == c || F.cell1 == c));
    }
}
