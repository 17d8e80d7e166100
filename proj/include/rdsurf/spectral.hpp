#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdsurf/fem.hpp"

namespace rdsurf {

struct EigenPair {
  double lambda = 0;
  Vec vector;        // M-normalised, b' M b = 1
  // |L b - lambda M b| / (max(lambda, lambda_band) |M b|) where lambda_band
  // is the largest requested eigenvalue; gives the zero mode a usable scale
  double residual = 0;
};

struct EigenBasis {
  std::vector<EigenPair> pairs;            // lambda ascending
  std::vector<std::vector<int>> groups;    // indices clustered by eigenvalue
  bool has_zero_mode = false;              // leading pair is the constant mode
};

struct EigenOptions {
  int k = 10;
  double tol = 1e-9;
  std::uint64_t seed = 12345;
  int max_iterations = 800;
  double group_rel_tol = 1e-3;
};

// Smallest-k generalised pairs L b = lambda M b, L symmetric PSD, M SPD.
// Preconditioned block iteration with a shifted factorisation; deterministic
// for a fixed seed.
EigenBasis solve_eigenbasis(const SpMat& L, const SpMat& M,
                            const EigenOptions& opts);

// Cluster sorted eigenvalues: consecutive values join a group when their gap
// is below rel_tol * max(lambda, lambda_floor). lambda_floor <= 0 selects
// a floor relative to the largest eigenvalue present.
std::vector<std::vector<int>> group_multiplicities(
    const std::vector<double>& lambdas, double rel_tol = 1e-3,
    double lambda_floor = -1.0);

// M-orthogonal projection coefficients of a nodal field onto the basis.
Vec project_field(const EigenBasis& basis, const SpMat& M, const Vec& field);

// Warn threshold: eigenvalues above roughly (pi / h_mean)^2 are not resolved
// by the mesh. Returns the count of requested pairs beyond that limit.
int count_underresolved(const EigenBasis& basis, double mean_edge_length);

// prefix.csv holds the spectrum summary, prefix_XXXX.csv one vector each
void save_eigenbasis(const EigenBasis& basis, const std::string& prefix);
EigenBasis load_eigenbasis(const std::string& prefix);

}  // namespace rdsurf
