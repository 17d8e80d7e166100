// Timing comparison of the serial reference kernels against the OpenMP ones.
// Usage: bench_assembly [nx] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rdsurf/fem.hpp"
#include "rdsurf/mesh.hpp"
#include "rdsurf/models.hpp"

using namespace rdsurf;

namespace {

template <typename F>
double time_best(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-20s %10.4f ms %10.4f ms %8.2fx\n", name, serial * 1e3,
              parallel * 1e3, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  int nx = argc > 1 ? std::atoi(argv[1]) : 192;
  int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

  SurfaceMesh mesh = generate_rectangle(1.0, 4.0, nx, 4 * nx);
  auto model = make_murray();
  FemSpace space = make_fem_space(mesh, BC::NeumannZero);
  double alpha = 14.0;
  Vec x = homogeneous_state_vector(space, *model, alpha);
  for (int i = 0; i < x.size(); ++i)
    x[i] *= 1.0 + 0.01 * std::sin(0.37 * i);

  std::printf("mesh: %d vertices, %d triangles, %d dofs\n", mesh.n_vertices(),
              mesh.n_triangles(), space.n_dof);
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  std::printf("%-20s %13s %13s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  report("mass_full",
         time_best(repeats,
                   [&] { assemble_mass_full(mesh, Assembly::Serial); }),
         time_best(repeats,
                   [&] { assemble_mass_full(mesh, Assembly::Parallel); }));
  report("stiffness_full",
         time_best(repeats,
                   [&] { assemble_stiffness_full(mesh, Assembly::Serial); }),
         time_best(repeats,
                   [&] { assemble_stiffness_full(mesh, Assembly::Parallel); }));
  report("residual",
         time_best(repeats,
                   [&] {
                     assemble_residual(space, *model, x, alpha,
                                       Assembly::Serial);
                   }),
         time_best(repeats, [&] {
           assemble_residual(space, *model, x, alpha, Assembly::Parallel);
         }));
  report("jacobian",
         time_best(repeats,
                   [&] {
                     assemble_jacobian(space, *model, x, alpha,
                                       Assembly::Serial);
                   }),
         time_best(repeats, [&] {
           assemble_jacobian(space, *model, x, alpha, Assembly::Parallel);
         }));

  // agreement check so the two paths cannot drift apart silently
  double dr = (assemble_residual(space, *model, x, alpha, Assembly::Serial) -
               assemble_residual(space, *model, x, alpha, Assembly::Parallel))
                  .norm();
  SpMat dj = assemble_jacobian(space, *model, x, alpha, Assembly::Serial) -
             assemble_jacobian(space, *model, x, alpha, Assembly::Parallel);
  std::printf("serial/parallel agreement: residual %.3g, jacobian %.3g\n", dr,
              dj.norm());
  return (dr < 1e-10 && dj.norm() < 1e-10) ? 0 : 1;
}
