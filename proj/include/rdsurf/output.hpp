#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rdsurf/mesh.hpp"

namespace rdsurf {

// legacy ASCII VTK polydata with one scalar array per named field;
// every field must have one value per vertex
void save_fields_vtk(
    const SurfaceMesh& mesh,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& fields,
    const std::string& path);

// generic CSV writer, 17 significant digits per value
void save_table_csv(const std::vector<std::string>& columns,
                    const std::vector<std::vector<double>>& rows,
                    const std::string& path);

}  // namespace rdsurf
