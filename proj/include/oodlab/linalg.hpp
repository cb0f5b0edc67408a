#pragma once

#include <string>
#include <vector>

#include "oodlab/errors.hpp"

namespace oodlab {

// Small dense row-major matrix. Everything in the analysis stack is tiny
// (correlation matrices, loadings, rotation matrices), so this stays simple.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  static Matrix identity(int n);
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double frobenius_norm(const Matrix& a);

// A square matrix with row/column labels (divergence grids, CER cross tables).
struct NamedMatrix {
  std::vector<std::string> names;
  Matrix values;
};

struct EigenResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i is the unit eigenvector for values[i]
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Satisfies A == V diag(values) V^T and V^T V == I to ~1e-12 for well-scaled
// inputs. Throws DataError when the input is not symmetric within symmetry_tol,
// NumericError if the sweeps fail to converge.
EigenResult eigen_symmetric(const Matrix& a, double symmetry_tol = 1e-9);

// Nearest orthogonal matrix (polar factor) of a square full-rank matrix,
// computed via eigen_symmetric on M^T M. Throws NumericError when M is
// numerically singular.
Matrix polar_orthogonal(const Matrix& m);

}  // namespace oodlab
