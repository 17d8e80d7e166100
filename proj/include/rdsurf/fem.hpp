#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>

#include "rdsurf/mesh.hpp"
#include "rdsurf/models.hpp"

namespace rdsurf {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

enum class Assembly { Serial, Parallel };

// Piecewise-linear nodal space on a surface mesh. DirichletZero eliminates
// boundary vertices from the dof set; the eliminated values enter residuals
// and Jacobians through the model's homogeneous state.
struct FemSpace {
  const SurfaceMesh* mesh = nullptr;
  BC bc = BC::NeumannZero;
  std::vector<int> vertex_to_dof;  // -1 for eliminated vertices
  std::vector<int> dof_to_vertex;
  int n_dof = 0;

  // full-vertex operators, no boundary treatment
  SpMat mass_full;
  SpMat stiffness_full;
};

FemSpace make_fem_space(const SurfaceMesh& mesh, BC bc,
                        Assembly mode = Assembly::Parallel);

// dof-by-dof consistent mass (SPD) and cotangent stiffness (PSD).
SpMat assemble_mass(const FemSpace& space);
SpMat assemble_stiffness(const FemSpace& space);

// full-vertex operators for a bare mesh
SpMat assemble_mass_full(const SurfaceMesh& mesh, Assembly mode = Assembly::Parallel);
SpMat assemble_stiffness_full(const SurfaceMesh& mesh, Assembly mode = Assembly::Parallel);

// Galerkin residual of the stacked state x = (a; b), length 2 n_dof:
//   r_a = -D1 L a + chi C(a, b) + F(a, b)
//   r_b = -D2 L b + G(a, b)
// with C_i = integral of a grad(b) . grad(phi_i) and F, G the mass-weighted
// reactions. r = M xdot in the time-dependent reading.
Vec assemble_residual(const FemSpace& space, const RDModel& model, const Vec& x,
                      double alpha, Assembly mode = Assembly::Parallel);

// analytic Jacobian dr/dx, sparse 2 n_dof square
SpMat assemble_jacobian(const FemSpace& space, const RDModel& model,
                        const Vec& x, double alpha,
                        Assembly mode = Assembly::Parallel);

// dr/dalpha by central differences (step h relative to max(1, |alpha|))
Vec residual_alpha_derivative(const FemSpace& space, const RDModel& model,
                              const Vec& x, double alpha, double h = 1e-6);

// stacked homogeneous state restricted to dofs
Vec homogeneous_state_vector(const FemSpace& space, const RDModel& model,
                             double alpha);

// expand one component's dof values to per-vertex values, filling the
// eliminated vertices with boundary_value
Vec expand_field(const FemSpace& space, const Vec& dof_values,
                 double boundary_value);
Vec restrict_field(const FemSpace& space, const Vec& vertex_values);

void save_matrix_market(const SpMat& m, const std::string& path);
SpMat load_matrix_market(const std::string& path);

}  // namespace rdsurf
