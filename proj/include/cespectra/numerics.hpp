#pragma once

// Dense kernels and special functions shared by every other module: symmetric
// matrices, a full symmetric eigensolver (Householder tridiagonalization followed
// by implicit QL), Cholesky, and the normal / gamma distribution functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cespectra/errors.hpp"

namespace cespectra {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Small vector helpers

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vector unit_vector(std::size_t dim, std::size_t index) {
  Vector e(dim, 0.0);
  e.at(index) = 1.0;
  return e;
}

/// Pairwise (cascade) summation. Result depends only on the input order.
inline double pairwise_sum(std::span<const double> xs) {
  constexpr std::size_t kLeaf = 32;
  if (xs.size() <= kLeaf) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// ---------------------------------------------------------------------------
// Matrices

/// Row-major dense rectangular matrix. Used for sample batches, factors and
/// eigenvector bases.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Square symmetric matrix with finite entries. Mutable element access is
/// allowed; `validate()` re-checks the invariant.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double fill = 0.0) : dim_(dim), data_(dim * dim, fill) {}

  static SymMatrix identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  static SymMatrix diagonal(std::span<const double> diag) {
    SymMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  /// Builds from nested rows and validates symmetry and finiteness.
  static SymMatrix from_rows(const std::vector<Vector>& rows) {
    SymMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw DimensionMismatch(rows.size(), rows[i].size());
      for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
    }
    m.validate();
    return m;
  }

  std::size_t dim() const noexcept { return dim_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  void symmetrize() {
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i + 1; j < dim_; ++j) {
        const double avg = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = avg;
        (*this)(j, i) = avg;
      }
  }

  /// Throws DomainError on a non-finite entry or an asymmetric pair beyond
  /// `rel_tol` (relative to max(1, |a_ij|, |a_ji|)).
  void validate(double rel_tol = 1e-12) const {
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i; j < dim_; ++j) {
        const double a = (*this)(i, j);
        const double b = (*this)(j, i);
        if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("non-finite matrix entry");
        const double scale = std::max({1.0, std::abs(a), std::abs(b)});
        if (std::abs(a - b) > rel_tol * scale) throw DomainError("matrix is not symmetric");
      }
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }

  Vector apply(std::span<const double> v) const {
    if (v.size() != dim_) throw DimensionMismatch(dim_, v.size());
    Vector out(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = dot(row(i), v);
    return out;
  }

  double quadratic_form(std::span<const double> v) const { return dot(v, apply(v)); }

  SymMatrix operator-(const SymMatrix& other) const {
    if (other.dim_ != dim_) throw DimensionMismatch(dim_, other.dim_);
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < data_.size(); ++k) out.data_[k] = data_[k] - other.data_[k];
    return out;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Normal distribution

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal CDF through the C library's erfc, which is accurate to a
/// few ulps over the whole real line (relative accuracy in both tails).
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x) without cancellation.
inline double std_normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// log Phi(x), finite for every finite x.
inline double log_std_normal_cdf(double x) {
  if (x > -30.0) return std::log(std_normal_cdf(x));
  // Mills-ratio asymptotic series; relative error below 1e-13 for x <= -30.
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

inline double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("std_normal_quantile: u must lie in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

// ---------------------------------------------------------------------------
// Gamma distribution

/// Regularized lower incomplete gamma P(shape, x).
inline double regularized_gamma_p(double shape, double x) {
  if (!(shape > 0.0) || !(x >= 0.0)) throw DomainError("regularized_gamma_p: bad arguments");
  return boost::math::gamma_p(shape, x);
}

inline double gamma_cdf(double x, double shape, double scale) {
  if (!(scale > 0.0)) throw DomainError("gamma_cdf: scale must be positive");
  return x <= 0.0 ? 0.0 : regularized_gamma_p(shape, x / scale);
}

/// Quantile of Gamma(shape, scale).
inline double gamma_inverse_cdf(double u, double shape, double scale) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("gamma_inverse_cdf: u must lie in (0,1)");
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
    throw DomainError("gamma_inverse_cdf: shape and scale must be positive");
  try {
    return scale * boost::math::gamma_p_inv(shape, u);
  } catch (const boost::math::evaluation_error& e) {
    throw ConvergenceError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

struct SymEigenDecomposition {
  Vector values;        // ascending
  DenseMatrix vectors;  // column k is the unit eigenvector of values[k]
};

struct EigenExtremes {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  Vector v_min;
  Vector v_max;
};

namespace detail {

// Householder reduction to tridiagonal form. On entry `v` holds the matrix; on
// exit it holds the accumulated orthogonal transform, `d` the diagonal and
// `e` the sub-diagonal (e[0] unused).
inline void tridiagonalize(std::size_t n, std::vector<double>& v, Vector& d, Vector& e) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). `w` holds the transform transposed
// (row k = k-th basis vector) so each Givens rotation touches two contiguous rows.
inline void tridiagonal_ql(std::size_t n, Vector& d, Vector& e, std::vector<double>& w) {
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr int kMaxSweeps = 60;
  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kMaxSweeps) throw ConvergenceError("tridiagonal QL did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          double* a = w.data() + ii * n;
          double* b = w.data() + (ii + 1) * n;
          for (std::size_t k = 0; k < n; ++k) {
            const double hb = b[k];
            b[k] = s * a[k] + c * hb;
            a[k] = c * a[k] - s * hb;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix; eigenvalues ascending.
inline SymEigenDecomposition sym_eigen(const SymMatrix& m) {
  m.validate(1e-10);
  const std::size_t n = m.dim();
  SymEigenDecomposition out;
  if (n == 0) return out;
  std::vector<double> v = m.data();
  Vector d(n), e(n);
  detail::tridiagonalize(n, v, d, e);

  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w[j * n + i] = v[i * n + j];
  detail::tridiagonal_ql(n, d, e, w);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    const double* src = w.data() + order[k] * n;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = src[i];
  }
  return out;
}

inline EigenExtremes sym_eigen_extremes(const SymMatrix& m) {
  if (m.dim() == 0) throw DomainError("sym_eigen_extremes: empty matrix");
  const auto eig = sym_eigen(m);
  EigenExtremes ex;
  ex.lambda_min = eig.values.front();
  ex.lambda_max = eig.values.back();
  ex.v_min = eig.vectors.column(0);
  ex.v_max = eig.vectors.column(m.dim() - 1);
  return ex;
}

/// ||a - b||_op for symmetric a, b.
inline double operator_norm_diff(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  const auto ex = sym_eigen_extremes(a - b);
  return std::max(std::abs(ex.lambda_min), std::abs(ex.lambda_max));
}

// ---------------------------------------------------------------------------
// Cholesky

/// Lower-triangular L with L L^T = m. A pivot at or below 1e-12 * trace/dim is
/// reported as NotPositiveDefinite.
inline DenseMatrix cholesky(const SymMatrix& m) {
  m.validate(1e-10);
  const std::size_t n = m.dim();
  DenseMatrix L(n, n, 0.0);
  const double tol = n == 0 ? 0.0 : 1e-12 * std::abs(m.trace()) / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = m(j, j);
    const auto lj = L.row(j);
    for (std::size_t k = 0; k < j; ++k) diag -= lj[k] * lj[k];
    if (!(diag > tol)) throw NotPositiveDefinite(j + 1);
    const double ljj = std::sqrt(diag);
    L(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      const auto li = L.row(i);
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      L(i, j) = s / ljj;
    }
  }
  return L;
}

}  // namespace cespectra
