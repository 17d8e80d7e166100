#include "rdsurf/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rdsurf {

namespace {

using Mat = Eigen::MatrixXd;

// Whiten columns of V in the M inner product, dropping near-dependent
// directions. MV is kept consistent with V.
void svqb(const SpMat& M, Mat& V, Mat& MV) {
  if (V.cols() == 0) {
    MV.resize(V.rows(), 0);
    return;
  }
  for (int pass = 0; pass < 2; ++pass) {
    if (V.cols() == 0) {
      MV.resize(V.rows(), 0);
      return;
    }
    MV = M * V;
    Mat G = 0.5 * (V.transpose() * MV + (V.transpose() * MV).transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const double gmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(gmax > 0)) {
      V.resize(V.rows(), 0);
      MV.resize(MV.rows(), 0);
      return;
    }
    int keep = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i] > gmax * 1e-10) ++keep;
    Mat T(G.rows(), keep);
    int c = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i] > gmax * 1e-10)
        T.col(c++) = es.eigenvectors().col(i) / std::sqrt(es.eigenvalues()[i]);
    V = (V * T).eval();
    MV = (MV * T).eval();
  }
}

// V <- V - X (MX' V), assuming X is M-orthonormal with MX = M X
void ortho_against(const Mat& X, const Mat& MX, Mat& V) {
  if (X.cols() == 0 || V.cols() == 0) return;
  V -= X * (MX.transpose() * V);
  V -= X * (MX.transpose() * V);
}

}  // namespace

EigenBasis solve_eigenbasis(const SpMat& L, const SpMat& M,
                            const EigenOptions& opts) {
  const int n = int(L.rows());
  if (L.rows() != L.cols() || M.rows() != M.cols() || L.rows() != M.rows())
    throw std::invalid_argument("solve_eigenbasis: shape mismatch");
  if (opts.k < 1 || opts.k > n)
    throw std::invalid_argument("solve_eigenbasis: k out of range");

  const int m = std::min(n, opts.k + std::max(5, opts.k / 2));

  // shifted factorisation as the preconditioner; the shift keeps the
  // singular-Neumann case factorable and sits near the target band
  const double trL = Mat(L.diagonal()).sum();
  const double trM = Mat(M.diagonal()).sum();
  const double sigma = std::max(1e-3 * trL / trM, 1e-12);
  SpMat shifted = L + sigma * M;
  Eigen::SimplicialLDLT<SpMat> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("solve_eigenbasis: factorisation failed");

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat X(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = gauss(rng);
  Mat MX;
  svqb(M, X, MX);
  if (X.cols() < m) throw std::runtime_error("solve_eigenbasis: degenerate start");

  Mat P(n, 0), MP(n, 0);
  Vec theta = Vec::Zero(m);
  Mat LX = L * X;

  bool converged = false;
  Vec resid = Vec::Zero(m);
  for (int iter = 0; iter < opts.max_iterations && !converged; ++iter) {
    // Rayleigh-Ritz on the M-orthonormal block [X W P]
    Mat W = LX - MX * theta.asDiagonal();  // current residuals
    if (iter == 0) W.setZero();            // theta not meaningful yet

    Mat S(n, 0), MS(n, 0);
    {
      Mat Wp(n, 0);
      if (iter > 0) {
        Wp = solver.solve(W);
        ortho_against(X, MX, Wp);
        Mat MWp;
        svqb(M, Wp, MWp);
        Mat Pp = P;
        ortho_against(X, MX, Pp);
        ortho_against(Wp, MWp, Pp);
        Mat MPp;
        svqb(M, Pp, MPp);
        S.resize(n, X.cols() + Wp.cols() + Pp.cols());
        S << X, Wp, Pp;
        MS.resize(n, S.cols());
        MS << MX, MWp, MPp;
      } else {
        S = X;
        MS = MX;
      }
    }

    Mat LS = L * S;
    Mat A = S.transpose() * LS;
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("solve_eigenbasis: dense solve failed");

    const int mm = std::min<int>(m, int(S.cols()));
    Mat Y = es.eigenvectors().leftCols(mm);
    theta = es.eigenvalues().head(mm);

    Mat Xnew = S * Y;
    Mat MXnew = MS * Y;
    Mat LXnew = LS * Y;
    // direction memory: the part of the new block outside the old X
    if (iter > 0) {
      Mat Y2 = Y;
      Y2.topRows(X.cols()).setZero();
      P = S * Y2;
      ortho_against(Xnew, MXnew, P);
      svqb(M, P, MP);
      if (P.cols() > mm) {
        P = P.leftCols(mm).eval();
        MP = MP.leftCols(mm).eval();
      }
    }
    X = Xnew;
    MX = M * X;
    LX = L * X;

    // band-relative residuals: the zero mode of a Neumann operator has no
    // per-pair scale of its own, so measure against the top of the band
    const int kk = std::min<int>(opts.k, int(theta.size()));
    const double theta_band =
        std::max(std::abs(theta[std::max(kk - 1, 0)]), 1e-300);
    converged = true;
    for (int i = 0; i < kk; ++i) {
      const double rn = (LX.col(i) - theta[i] * MX.col(i)).norm();
      const double denom = std::max(std::abs(theta[i]), theta_band) *
                           std::max(MX.col(i).norm(), 1e-300);
      resid[i] = rn / denom;
      if (resid[i] > opts.tol) converged = false;
    }
    if (int(theta.size()) < opts.k) converged = false;
  }
  if (!converged)
    throw std::runtime_error("solve_eigenbasis: no convergence; worst residual " +
                             std::to_string(resid.head(opts.k).maxCoeff()));

  EigenBasis basis;
  basis.pairs.resize(size_t(opts.k));
  std::vector<double> lambdas(size_t(opts.k));
  for (int i = 0; i < opts.k; ++i) {
    EigenPair& p = basis.pairs[size_t(i)];
    p.lambda = theta[i];
    p.vector = X.col(i);
    // fix the overall sign for reproducibility: largest entry positive
    int imax = 0;
    p.vector.cwiseAbs().maxCoeff(&imax);
    if (p.vector[imax] < 0) p.vector = -p.vector;
    p.residual = resid[i];
    lambdas[size_t(i)] = p.lambda;
  }
  basis.groups = group_multiplicities(lambdas, opts.group_rel_tol);
  const double lmax = std::max(std::abs(lambdas.back()), 1.0);
  basis.has_zero_mode = std::abs(lambdas.front()) < 1e-8 * lmax;
  return basis;
}

std::vector<std::vector<int>> group_multiplicities(
    const std::vector<double>& lambdas, double rel_tol, double lambda_floor) {
  std::vector<std::vector<int>> groups;
  if (lambdas.empty()) return groups;
  for (size_t i = 1; i < lambdas.size(); ++i)
    if (lambdas[i] < lambdas[i - 1])
      throw std::invalid_argument("group_multiplicities: not sorted");
  double floor = lambda_floor;
  if (floor <= 0) floor = 1e-6 * std::max(std::abs(lambdas.back()), 1e-30);
  groups.push_back({0});
  for (size_t i = 1; i < lambdas.size(); ++i) {
    const double gap = lambdas[i] - lambdas[i - 1];
    const double scale = std::max(std::abs(lambdas[i]), floor);
    if (gap <= rel_tol * scale)
      groups.back().push_back(int(i));
    else
      groups.push_back({int(i)});
  }
  return groups;
}

Vec project_field(const EigenBasis& basis, const SpMat& M, const Vec& field) {
  Vec coeffs(Eigen::Index(basis.pairs.size()));
  const Vec mf = M * field;
  for (size_t i = 0; i < basis.pairs.size(); ++i)
    coeffs[Eigen::Index(i)] = basis.pairs[i].vector.dot(mf);
  return coeffs;
}

int count_underresolved(const EigenBasis& basis, double mean_edge_length) {
  if (mean_edge_length <= 0)
    throw std::invalid_argument("count_underresolved: bad edge length");
  const double pi = 3.14159265358979323846;
  const double limit = (pi / mean_edge_length) * (pi / mean_edge_length);
  int count = 0;
  for (const auto& p : basis.pairs)
    if (p.lambda > limit) ++count;
  return count;
}

namespace {
std::string vector_path(const std::string& prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d.csv", i);
  return prefix + buf;
}
}  // namespace

void save_eigenbasis(const EigenBasis& basis, const std::string& prefix) {
  std::FILE* fp = std::fopen((prefix + ".csv").c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + prefix + ".csv");
  std::fprintf(fp, "index,lambda,residual,group\n");
  std::vector<int> group_of(basis.pairs.size(), 0);
  for (size_t g = 0; g < basis.groups.size(); ++g)
    for (int i : basis.groups[g]) group_of[size_t(i)] = int(g);
  for (size_t i = 0; i < basis.pairs.size(); ++i)
    std::fprintf(fp, "%zu,%.17g,%.17g,%d\n", i, basis.pairs[i].lambda,
                 basis.pairs[i].residual, group_of[i]);
  std::fclose(fp);
  for (size_t i = 0; i < basis.pairs.size(); ++i) {
    std::FILE* vf = std::fopen(vector_path(prefix, int(i)).c_str(), "w");
    if (!vf) throw std::runtime_error("cannot open vector file");
    const Vec& v = basis.pairs[i].vector;
    for (Eigen::Index j = 0; j < v.size(); ++j)
      std::fprintf(vf, "%.17g\n", v[j]);
    std::fclose(vf);
  }
}

EigenBasis load_eigenbasis(const std::string& prefix) {
  std::ifstream in(prefix + ".csv");
  if (!in) throw std::runtime_error("cannot open " + prefix + ".csv");
  std::string line;
  std::getline(in, line);  // header
  EigenBasis basis;
  std::vector<int> group_of;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    EigenPair p;
    int grp = 0;
    std::getline(ss, tok, ',');
    std::getline(ss, tok, ',');
    p.lambda = std::stod(tok);
    std::getline(ss, tok, ',');
    p.residual = std::stod(tok);
    std::getline(ss, tok, ',');
    grp = std::stoi(tok);
    basis.pairs.push_back(std::move(p));
    group_of.push_back(grp);
  }
  for (size_t i = 0; i < basis.pairs.size(); ++i) {
    std::ifstream vf(vector_path(prefix, int(i)));
    if (!vf) throw std::runtime_error("missing vector file " + vector_path(prefix, int(i)));
    std::vector<double> vals;
    double v = 0;
    while (vf >> v) vals.push_back(v);
    basis.pairs[i].vector = Eigen::Map<Vec>(vals.data(), Eigen::Index(vals.size()));
  }
  if (!group_of.empty()) {
    basis.groups.resize(size_t(*std::max_element(group_of.begin(), group_of.end())) + 1);
    for (size_t i = 0; i < group_of.size(); ++i)
      basis.groups[size_t(group_of[i])].push_back(int(i));
    const double lmax = std::max(std::abs(basis.pairs.back().lambda), 1.0);
    basis.has_zero_mode = std::abs(basis.pairs.front().lambda) < 1e-8 * lmax;
  }
  return basis;
}

}  // namespace rdsurf
