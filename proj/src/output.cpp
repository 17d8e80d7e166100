#include "rdsurf/output.hpp"

#include <cstdio>
#include <fstream>

namespace rdsurf {

void save_fields_vtk(
    const SurfaceMesh& mesh,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& fields,
    const std::string& path) {
  for (const auto& f : fields)
    if (f.second.size() != mesh.n_vertices())
      throw MeshError("save_fields_vtk: field " + f.first +
                      " has wrong length");
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open " + path);
  char buf[128];
  out << "# vtk DataFile Version 3.0\nrdsurf fields\nASCII\n"
      << "DATASET POLYDATA\nPOINTS " << mesh.n_vertices() << " double\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  out << "POLYGONS " << mesh.n_triangles() << " " << 4 * mesh.n_triangles()
      << "\n";
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "POINT_DATA " << mesh.n_vertices() << "\n";
  for (const auto& f : fields) {
    out << "SCALARS " << f.first << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < f.second.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", f.second[i]);
      out << buf;
    }
  }
}

void save_table_csv(const std::vector<std::string>& columns,
                    const std::vector<std::vector<double>>& rows,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open " + path);
  for (size_t c = 0; c < columns.size(); ++c)
    out << columns[c] << (c + 1 < columns.size() ? "," : "\n");
  char buf[64];
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw MeshError("save_table_csv: row width mismatch");
    for (size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
      out << buf << (c + 1 < row.size() ? "," : "\n");
    }
  }
}

}  // namespace rdsurf
