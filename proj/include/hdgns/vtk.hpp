#pragma once

// Legacy ASCII VTK output, one unstructured-grid file per snapshot. Fields
// live on cells: the velocity vector and the pressure at the centroid, plus
// the per-cell permeability.

#include "hdgns/forms.hpp"
#include "hdgns/spaces.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace hdgns {

inline void write_vtk_snapshot(const std::string& path, const FormContext& ctx,
                               const Eigen::VectorXd& state, double t) {
  const Mesh& mesh = ctx.mesh;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(9);
  out << std::scientific;

  out << "# vtk DataFile Version 3.0\n";
  out << "hdg-nsdarcy snapshot t=" << t << "\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";

  out << "POINTS " << mesh.verts.size() << " double\n";
  for (const auto& v : mesh.verts) out << v.x() << " " << v.y() << " 0\n";

  int nc = mesh.n_cells();
  out << "CELLS " << nc << " " << 4 * nc << "\n";
  for (const auto& c : mesh.cells) out << "3 " << c[0] << " " << c[1] << " " << c[2] << "\n";
  out << "CELL_TYPES " << nc << "\n";
  for (int c = 0; c < nc; ++c) out << "5\n";

  const Eigen::Vector2d centroid(1.0 / 3.0, 1.0 / 3.0);
  out << "CELL_DATA " << nc << "\n";
  out << "VECTORS velocity double\n";
  for (int c = 0; c < nc; ++c) {
    Eigen::Vector2d u = eval_cell_velocity(ctx.dofs, state, c, centroid);
    out << u.x() << " " << u.y() << " 0\n";
  }
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int c = 0; c < nc; ++c)
    out << eval_cell_pressure(ctx.dofs, state, c, centroid) << "\n";
  out << "SCALARS permeability double 1\nLOOKUP_TABLE default\n";
  for (int c = 0; c < nc; ++c)
    out << (ctx.params.kappa.empty() ? 0.0 : ctx.params.kappa[c]) << "\n";

  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace hdgns
