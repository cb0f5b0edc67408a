#include "oodlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oodlab {

Matrix Matrix::identity(int n) {
  Matrix m(n, n, 0.0);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DataError("matmul: inner dimensions disagree");
  Matrix c(a.rows, b.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

EigenResult eigen_symmetric(const Matrix& input, double symmetry_tol) {
  if (input.rows != input.cols) throw DataError("eigen_symmetric: matrix not square");
  const int n = input.rows;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > symmetry_tol) {
        throw DataError("eigen_symmetric: matrix not symmetric at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
      }
    }
  }

  Matrix a = input;
  // Work on the symmetrized copy so tiny asymmetries cannot bias the sweeps.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = v;
    }
  }
  Matrix v = Matrix::identity(n);

  const int max_sweeps = 100;
  const double scale = std::max(frobenius_norm(a), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;

    // One cyclic sweep: annihilate each off-diagonal pair in turn.
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = c * arp - s * arq;
          a(r, q) = a(q, r) = s * arp + c * arq;
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
  if (sweep == max_sweeps) throw NumericError("eigen_symmetric: Jacobi sweeps did not converge");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return a(x, x) > a(y, y); });

  EigenResult res;
  res.values.resize(n);
  res.vectors = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    res.values[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) res.vectors(i, j) = v(i, order[j]);
  }
  return res;
}

Matrix polar_orthogonal(const Matrix& m) {
  if (m.rows != m.cols) throw DataError("polar_orthogonal: matrix not square");
  const int n = m.rows;
  const Matrix mtm = matmul(transpose(m), m);
  const EigenResult eig = eigen_symmetric(mtm, 1e-8);
  const double lmax = std::max(eig.values.front(), 0.0);
  Matrix inv_sqrt(n, n, 0.0);
  for (int k = 0; k < n; ++k) {
    const double lam = eig.values[k];
    if (lam <= lmax * 1e-24 || lam <= 0.0) {
      throw NumericError("polar_orthogonal: matrix numerically singular");
    }
    const double w = 1.0 / std::sqrt(lam);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        inv_sqrt(i, j) += w * eig.vectors(i, k) * eig.vectors(j, k);
      }
    }
  }
  return matmul(m, inv_sqrt);
}

}  // namespace oodlab
