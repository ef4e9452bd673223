#include "deschash/covstats.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "deschash/error.hpp"

namespace deschash {

namespace {

void check_square_symmetric(const Matrix& a, const char* name) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(std::string(name) + " must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(std::string(name) + " is not symmetric");
  }
}

void check_count(Index m, Index n) {
  if (m < 1 || m > n) {
    throw Error("requested " + std::to_string(m) + " eigenvectors of a " + std::to_string(n) +
                "-dimensional problem");
  }
}

void fix_signs(Matrix& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c) {
      if (std::abs(rows(r, c)) > 1e-12) {
        if (rows(r, c) < 0.0) rows.row(r) *= -1.0;
        break;
      }
    }
  }
}

Eigen::SelfAdjointEigenSolver<Matrix> solve_symmetric(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw Error("symmetric eigen solver did not converge");
  }
  const Matrix residual = a * solver.eigenvectors() -
                          solver.eigenvectors() * solver.eigenvalues().asDiagonal();
  const double res = residual.norm();
  if (!std::isfinite(res) || res > 1e-6 * std::max(1.0, a.norm())) {
    throw Error("symmetric eigen solver did not converge (residual norm " + std::to_string(res) +
                ")");
  }
  return solver;
}

}  // namespace

Matrix difference_covariance(const DescriptorSet& set, std::span<const IndexPair> pairs) {
  if (pairs.empty()) throw Error("difference covariance of an empty pair list");
  const Index n = set.dim();
  const auto count = static_cast<std::size_t>(set.count());
  Matrix diffs(static_cast<Index>(pairs.size()), n);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].i >= count || pairs[k].j >= count) {
      throw Error("pair index out of range in difference covariance");
    }
    diffs.row(static_cast<Index>(k)) =
        set.row(static_cast<Index>(pairs[k].i)) - set.row(static_cast<Index>(pairs[k].j));
  }
  Matrix cov = Matrix::Zero(n, n);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(diffs.transpose());
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov / static_cast<double>(pairs.size());
}

DiffCovariance DiffCovariance::compute(const DescriptorSet& set, const PairSet& pairs) {
  const auto positives = pairs.positive_indices();
  return {difference_covariance(set, positives), difference_covariance(set, pairs.negatives)};
}

EigenRows smallest_eigenvectors_symmetric(const Matrix& a, Index m) {
  check_square_symmetric(a, "matrix");
  check_count(m, a.rows());
  const Matrix sym = 0.5 * (a + a.transpose());
  const auto solver = solve_symmetric(sym);
  EigenRows out{solver.eigenvectors().leftCols(m).transpose(), solver.eigenvalues().head(m)};
  fix_signs(out.vectors);
  return out;
}

EigenRows smallest_generalized_eigenvectors(const Matrix& c_plus, const Matrix& c_minus, Index m,
                                            double ridge) {
  check_square_symmetric(c_plus, "C+");
  check_square_symmetric(c_minus, "C-");
  if (c_plus.rows() != c_minus.rows()) throw Error("C+ and C- differ in dimension");
  if (!(ridge >= 0.0)) throw Error("ridge must be non-negative");
  const Index n = c_plus.rows();
  check_count(m, n);

  Matrix b = 0.5 * (c_minus + c_minus.transpose());
  b.diagonal().array() += ridge;
  Eigen::LLT<Matrix> chol(b);
  const Vector diag = chol.matrixLLT().diagonal();
  if (chol.info() != Eigen::Success || diag.minCoeff() <= 0.0 ||
      diag.minCoeff() * diag.minCoeff() < 1e-14 * diag.maxCoeff() * diag.maxCoeff()) {
    throw Error("C- + ridge*I is numerically singular; increase the ridge");
  }

  // A' = L^-1 C+ L^-T
  const Matrix l_inv_cp = chol.matrixL().solve(c_plus);
  Matrix whitened = chol.matrixL().solve(l_inv_cp.transpose());
  whitened = 0.5 * (whitened + whitened.transpose());
  const auto solver = solve_symmetric(whitened);

  const Matrix w = solver.eigenvectors().leftCols(m);
  EigenRows out{chol.matrixU().solve(w).transpose(), solver.eigenvalues().head(m)};
  fix_signs(out.vectors);
  return out;
}

double default_ridge(const Matrix& c_minus) {
  return 1e-6 * c_minus.trace() / static_cast<double>(c_minus.rows());
}

}  // namespace deschash
