#ifndef PQLAB_LINALG_HPP
#define PQLAB_LINALG_HPP

#include <optional>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "pqlab/discrete.hpp"

namespace pqlab {

/// Solves A x = b. Symmetric matrices go through LDLT first (handles the
/// indefinite Hessians met at saddle points); LU is the fallback.
inline std::optional<Vec> sparse_solve(const SpMat& a, const Vec& b, bool symmetric = true) {
  auto finite = [](const Vec& x) { return x.allFinite(); };
  if (symmetric) {
    Eigen::SimplicialLDLT<SpMat> ldlt(a);
    if (ldlt.info() == Eigen::Success) {
      Vec x = ldlt.solve(b);
      if (ldlt.info() == Eigen::Success && finite(x)) {
        const double rel = (a * x - b).norm() / std::max(b.norm(), 1e-300);
        if (rel < 1e-6) return x;
      }
    }
  }
  SpMat ac = a;
  ac.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(ac);
  lu.factorize(ac);
  if (lu.info() != Eigen::Success) return std::nullopt;
  Vec x = lu.solve(b);
  if (lu.info() != Eigen::Success || !finite(x)) return std::nullopt;
  return x;
}

/// Appends dense border rows/columns to a sparse square matrix:
/// [[A, C], [R, D]] with C: n x m, R: m x n, D: m x m.
inline SpMat bordered(const SpMat& a, const Eigen::MatrixXd& cols, const Eigen::MatrixXd& rows,
                      const Eigen::MatrixXd& corner) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(cols.cols());
  Triplets trip;
  trip.reserve(a.nonZeros() + 2 * n * m + m * m);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      if (cols(i, j) != 0.0) trip.emplace_back(i, n + j, cols(i, j));
      if (rows(j, i) != 0.0) trip.emplace_back(n + j, i, rows(j, i));
    }
    for (int i = 0; i < m; ++i) trip.emplace_back(n + j, n + i, corner(j, i));
  }
  SpMat out(n + m, n + m);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace pqlab

#endif
