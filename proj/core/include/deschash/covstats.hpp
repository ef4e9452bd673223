#pragma once

// Difference covariances of pair sets and the eigenproblems built on them.

#include <span>

#include "deschash/descriptor_data.hpp"

namespace deschash {

/// Mean outer product of descriptor differences over `pairs`.
Matrix difference_covariance(const DescriptorSet& set, std::span<const IndexPair> pairs);

struct DiffCovariance {
  Matrix c_plus;   ///< positives
  Matrix c_minus;  ///< negatives

  Index dim() const { return c_plus.rows(); }

  static DiffCovariance compute(const DescriptorSet& set, const PairSet& pairs);
};

/// Eigenvectors as rows, eigenvalues ascending.
struct EigenRows {
  Matrix vectors;
  Vector values;
};

/// The `m` algebraically smallest eigenpairs of a symmetric matrix, as orthonormal rows.
/// Each row's first entry above 1e-12 in magnitude is made positive.
EigenRows smallest_eigenvectors_symmetric(const Matrix& a, Index m);

/// Smallest `m` solutions of `c_plus v = lambda (c_minus + ridge I) v`.
///
/// Solved by whitening with the Cholesky factor of the regularized `c_minus` followed
/// by a symmetric solve. Rows are scaled so that `v^T (c_minus + ridge I) v = 1`.
EigenRows smallest_generalized_eigenvectors(const Matrix& c_plus, const Matrix& c_minus, Index m,
                                            double ridge);

/// 1e-6 * trace(c_minus) / n.
double default_ridge(const Matrix& c_minus);

}  // namespace deschash
