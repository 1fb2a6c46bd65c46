#ifndef MSFV_SOLVERS_HPP
#define MSFV_SOLVERS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "msfv/error.hpp"

namespace msfv {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Compressed-row matrix from (row, col, value) entries. Duplicates are
/// summed and exact zeros dropped, so the stored pattern is structural.
inline SparseMatrix make_sparse(int n_rows, int n_cols, const std::vector<Triplet>& entries) {
  SparseMatrix m(n_rows, n_cols);
  m.setFromTriplets(entries.begin(), entries.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

struct SolveOptions {
  double tol = 1e-10;
  /// Non-positive means 10 * n.
  int max_iter = 0;
};

/// Diagonally scaled conjugate gradient. Throws SolverFailure when
/// ||Ax - b|| / ||b|| does not reach `tol` within the iteration budget.
inline Vector solve_spd(const SparseMatrix& a, const Vector& b, const SolveOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ConfigError("solve_spd: tol must be positive");
  if (b.norm() == 0.0) return Vector::Zero(b.size());
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  const int budget = opt.max_iter > 0 ? opt.max_iter : 10 * static_cast<int>(a.rows());
  cg.setTolerance(opt.tol);
  cg.setMaxIterations(budget);
  cg.compute(a);
  Vector x = cg.solve(b);
  int used = static_cast<int>(cg.iterations());
  double rel = (a * x - b).norm() / b.norm();
  // The recurrence residual can drift from the true one; restart from the
  // current iterate while budget remains.
  while (rel > opt.tol && cg.info() == Eigen::Success && used < budget) {
    cg.setMaxIterations(budget - used);
    x = cg.solveWithGuess(b, x);
    used += std::max<int>(1, static_cast<int>(cg.iterations()));
    rel = (a * x - b).norm() / b.norm();
  }
  if (!(rel <= opt.tol))
  {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", rel);
    throw SolverFailure("conjugate gradient stopped after " + std::to_string(used) +
                            " iterations at relative residual " + buf,
                        rel);
  }
  return x;
}

/// Sparse Cholesky (LDL^T) for small SPD systems such as local Neumann
/// problems, where machine-level conservation is wanted.
inline Vector solve_spd_direct(const SparseMatrix& a, const Vector& b) {
  Eigen::SparseMatrix<double> col = a;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(col);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("sparse LDL^T factorization failed");
  Vector x = ldlt.solve(b);
  if (ldlt.info() != Eigen::Success) throw NumericalError("sparse LDL^T solve failed");
  return x;
}

/// Sparse LU for nonsymmetric systems (Newton Jacobians, pinned coarse
/// pressure matrices).
inline Vector solve_general(const SparseMatrix& a, const Vector& b) {
  Eigen::SparseMatrix<double> col = a;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(col);
  lu.factorize(col);
  if (lu.info() != Eigen::Success)
    throw NumericalError("sparse LU factorization failed: " + lu.lastErrorMessage());
  Vector x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw NumericalError("sparse LU solve failed");
  return x;
}

/// Dense partial-pivot LU reference path. Intended for n <= 2000.
inline Vector solve_dense(const Eigen::MatrixXd& a, const Vector& b) {
  if (a.rows() > 2000) throw ConfigError("solve_dense: system larger than 2000 unknowns");
  return a.partialPivLu().solve(b);
}

/// Square matrix of order n <= 8, stored row-major.
struct DenseSmall {
  static constexpr int capacity = 8;
  int n = 0;
  std::array<double, capacity * capacity> a{};

  DenseSmall() = default;
  explicit DenseSmall(int n_) : n(n_) {
    if (n_ < 0 || n_ > capacity) throw ConfigError("DenseSmall: order must be in [0, 8]");
  }

  static DenseSmall identity(int n) {
    DenseSmall m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static DenseSmall diagonal(std::span<const double> d) {
    DenseSmall m(static_cast<int>(d.size()));
    for (int i = 0; i < m.n; ++i) m(i, i) = d[i];
    return m;
  }

  double& operator()(int i, int j) { return a[i * capacity + j]; }
  double operator()(int i, int j) const { return a[i * capacity + j]; }

  DenseSmall operator*(const DenseSmall& o) const {
    DenseSmall r(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) r(i, j) += (*this)(i, k) * o(k, j);
    return r;
  }

  double max_abs() const {
    double m = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m = std::max(m, std::abs((*this)(i, j)));
    return m;
  }
};

/// Gauss-Jordan inversion with partial pivoting. A pivot below
/// 1e-14 * max|A| is reported as a singular block; `block_id` names the
/// dual cell in the message.
inline DenseSmall invert_small(const DenseSmall& m, int block_id = -1) {
  const int n = m.n;
  DenseSmall work = m;
  DenseSmall inv = DenseSmall::identity(n);
  const double scale = m.max_abs();
  const double threshold = 1e-14 * scale;
  auto singular = [&]() {
    return SingularBlock("singular Gram block" +
                             (block_id >= 0 ? " in dual cell " + std::to_string(block_id)
                                            : std::string()),
                         block_id);
  };
  if (n > 0 && scale == 0.0) throw singular();
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(work(r, col)) > std::abs(work(piv, col))) piv = r;
    if (!(std::abs(work(piv, col)) > threshold)) throw singular();
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(work(col, j), work(piv, j));
        std::swap(inv(col, j), inv(piv, j));
      }
    const double d = work(col, col);
    for (int j = 0; j < n; ++j) {
      work(col, j) /= d;
      inv(col, j) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        work(r, j) -= f * work(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

} // namespace msfv

#endif // MSFV_SOLVERS_HPP
