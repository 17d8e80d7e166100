#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdsurf {

using Vec3 = Eigen::Vector3d;

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : MeshError {
  using MeshError::MeshError;
};
struct NonManifoldError : MeshError {
  using MeshError::MeshError;
};

// Triangle mesh with boundary tagging. Immutable after finalize().
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;  // CCW
  std::vector<char> vertex_on_boundary;       // per vertex flag
  std::vector<int> boundary_vertices;         // sorted indices

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }

  double triangle_area(int t) const;
  double total_area() const;
  Eigen::AlignedBox3d bounding_box() const;

  // Validates indices and manifoldness, computes boundary set, rejects
  // zero-area triangles. Throws MeshError subclasses on violation.
  void finalize();

  // Boundary edges (each incident to exactly one triangle), available
  // after finalize().
  std::vector<std::array<int, 2>> boundary_edges() const;

  int euler_characteristic() const;
  int boundary_loop_count() const;
};

enum class MeshFormat { OBJ, OFF };

SurfaceMesh load_mesh(const std::string& path);
SurfaceMesh load_mesh(const std::string& path, MeshFormat format);
void save_mesh(const SurfaceMesh& mesh, const std::string& path);
void save_off(const SurfaceMesh& mesh, const std::string& path);
void save_obj(const SurfaceMesh& mesh, const std::string& path);

// Planar grid on [0,W]x[0,H], each cell split along a consistent diagonal.
SurfaceMesh generate_rectangle(double W, double H, int nx, int ny);

// Cap of a sphere: polar angle theta <= theta_max with sin(theta_max) = zeta
// and sphere radius R / zeta, so the rim is a circle of radius R at height 0.
SurfaceMesh generate_spherical_cap(double R, double zeta, int n);

// Unit icosphere (closed), `subdivisions` rounds of 1->4 splits reprojected
// onto the sphere. Test geometry for closed-surface spectra.
SurfaceMesh generate_icosphere(int subdivisions, double radius = 1.0);

// Flat 1->4 split at edge midpoints; geometry unchanged.
// If `midpoint_of` is non-null it receives, for every new vertex index
// >= mesh.n_vertices(), the parent edge endpoints.
SurfaceMesh subdivide(const SurfaceMesh& mesh,
                      std::vector<std::array<int, 2>>* midpoint_of = nullptr);

// Garland-Heckbert quadric edge collapse down to <= target_triangles + 2
// triangles. Boundary edges contribute constraint-plane quadrics so open
// boundaries keep their shape. Throws MeshError if topology constraints
// block further collapses before the target is reached.
SurfaceMesh decimate(const SurfaceMesh& mesh, int target_triangles);

// Per-target-vertex barycentric interpolation rows on source faces.
struct InterpolationMap {
  struct Entry {
    int src = -1;
    double w = 0.0;
  };
  int n_source = 0;
  std::vector<std::array<Entry, 3>> rows;  // one per target vertex

  int n_target() const { return static_cast<int>(rows.size()); }
  Eigen::VectorXd apply(const Eigen::VectorXd& field) const;
  bool is_identity() const;
};

// Projects every target vertex onto its nearest source face (BVH search,
// parallel over targets) and records the barycentric weights. Throws
// MeshError if a target vertex is farther than max_dist_fraction of the
// source bounding-box diagonal from every face.
InterpolationMap build_interpolation(const SurfaceMesh& source,
                                     const SurfaceMesh& target,
                                     double max_dist_fraction = 0.1);

void save_interpolation_csv(const InterpolationMap& map,
                            const std::string& path);

}  // namespace rdsurf
