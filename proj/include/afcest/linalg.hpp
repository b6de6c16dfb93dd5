#pragma once

// Compressed-row sparse matrices, nodal vectors and the direct sparse LU
// (UMFPACK) behind every linear solve.

#include <suitesparse/umfpack.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "afcest/mesh.hpp"

namespace afcest {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Row-compressed matrix with sorted, unique column indices per row.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  /// Sums duplicate entries. Entries in `triplets` define the pattern even
  /// when their value is zero.
  static CsrMatrix from_triplets(Index n_rows, Index n_cols, std::vector<Triplet> triplets) {
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.offsets_.assign(static_cast<std::size_t>(n_rows) + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
      const Triplet& t = triplets[k];
      if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
        throw std::out_of_range("triplet index out of range");
      double sum = 0.0;
      std::size_t j = k;
      for (; j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col; ++j)
        sum += triplets[j].value;
      m.cols_.push_back(t.col);
      m.values_.push_back(sum);
      ++m.offsets_[t.row + 1];
      k = j;
    }
    std::partial_sum(m.offsets_.begin(), m.offsets_.end(), m.offsets_.begin());
    return m;
  }

  /// Same pattern as `other`, all values zero.
  static CsrMatrix zeros_like(const CsrMatrix& other) {
    CsrMatrix m = other;
    std::fill(m.values_.begin(), m.values_.end(), 0.0);
    return m;
  }

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const Index> offsets() const { return offsets_; }
  std::span<const Index> col_indices() const { return cols_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  Index row_begin(Index i) const { return offsets_[i]; }
  Index row_end(Index i) const { return offsets_[i + 1]; }
  Index col(Index k) const { return cols_[k]; }
  double value(Index k) const { return values_[k]; }
  double& value(Index k) { return values_[k]; }

  /// Storage position of (i, j), or kNone outside the pattern.
  Index find(Index i, Index j) const {
    auto first = cols_.begin() + offsets_[i];
    auto last = cols_.begin() + offsets_[i + 1];
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return kNone;
    return static_cast<Index>(it - cols_.begin());
  }

  double at(Index i, Index j) const {
    Index k = find(i, j);
    return k == kNone ? 0.0 : values_[k];
  }

  bool same_pattern(const CsrMatrix& other) const {
    return n_rows_ == other.n_rows_ && n_cols_ == other.n_cols_ && offsets_ == other.offsets_ &&
           cols_ == other.cols_;
  }

  /// Position of the transposed entry for every stored entry; requires a
  /// structurally symmetric pattern.
  std::vector<Index> transpose_positions() const {
    std::vector<Index> pos(nnz());
    for (Index i = 0; i < n_rows_; ++i)
      for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        Index t = find(cols_[k], i);
        if (t == kNone) throw std::logic_error("matrix pattern is not structurally symmetric");
        pos[k] = t;
      }
    return pos;
  }

  bool structurally_symmetric() const {
    if (n_rows_ != n_cols_) return false;
    for (Index i = 0; i < n_rows_; ++i)
      for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k)
        if (find(cols_[k], i) == kNone) return false;
    return true;
  }

  std::vector<double> multiply(std::span<const double> x) const {
    if (static_cast<Index>(x.size()) != n_cols_) throw std::invalid_argument("multiply: size mismatch");
    std::vector<double> y(n_rows_, 0.0);
    for (Index i = 0; i < n_rows_; ++i) {
      double s = 0.0;
      for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * x[cols_[k]];
      y[i] = s;
    }
    return y;
  }

  double norm_inf() const {
    double m = 0.0;
    for (Index i = 0; i < n_rows_; ++i) {
      double s = 0.0;
      for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k) s += std::abs(values_[k]);
      m = std::max(m, s);
    }
    return m;
  }

  /// Entrywise sum on identical patterns.
  friend CsrMatrix operator+(const CsrMatrix& a, const CsrMatrix& b) {
    if (!a.same_pattern(b)) throw std::invalid_argument("matrix sum requires identical patterns");
    CsrMatrix c = a;
    for (std::size_t k = 0; k < c.values_.size(); ++k) c.values_[k] += b.values_[k];
    return c;
  }

 private:
  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> cols_;
  std::vector<double> values_;
};

/// Matrix Market coordinate export (1-based indices).
inline void write_matrix_market(std::ostream& os, const CsrMatrix& m) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
  os.precision(17);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index k = m.row_begin(i); k < m.row_end(i); ++k) os << i + 1 << ' ' << m.col(k) + 1 << ' ' << m.value(k) << '\n';
}

/// Nodal coefficients of a P1 function plus the Dirichlet flags of its dofs.
struct DofVector {
  std::vector<double> values;
  std::vector<bool> dirichlet;

  DofVector() = default;
  explicit DofVector(std::size_t n, double fill = 0.0) : values(n, fill), dirichlet(n, false) {}
  DofVector(std::vector<double> v, std::vector<bool> mask) : values(std::move(v)), dirichlet(std::move(mask)) {
    if (dirichlet.empty()) dirichlet.assign(values.size(), false);
    if (dirichlet.size() != values.size()) throw std::invalid_argument("DofVector: mask size mismatch");
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(Index row, const std::string& what) : std::runtime_error(what), row_(row) {}
  Index row() const { return row_; }

 private:
  Index row_;
};

/// LU factorization of a square CsrMatrix. Factor once, solve many times;
/// solves with the same right-hand side are bitwise reproducible.
class SparseLu {
 public:
  explicit SparseLu(const CsrMatrix& m) : matrix_(m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SparseLu: matrix must be square");
    umfpack_di_defaults(control_);
    // UMFPACK factors column-compressed input; handing it our CSR arrays
    // factors the transpose, so solves use UMFPACK_At.
    const int n = m.rows();
    void* symbolic = nullptr;
    int status = umfpack_di_symbolic(n, n, matrix_.offsets().data(), matrix_.col_indices().data(),
                                     matrix_.values().data(), &symbolic, control_, nullptr);
    if (status != UMFPACK_OK) throw std::runtime_error("UMFPACK symbolic factorization failed: " + std::to_string(status));
    status = umfpack_di_numeric(matrix_.offsets().data(), matrix_.col_indices().data(), matrix_.values().data(),
                                symbolic, &numeric_, control_, nullptr);
    umfpack_di_free_symbolic(&symbolic);
    if (status == UMFPACK_WARNING_singular_matrix) {
      Index row = first_zero_pivot_row();
      umfpack_di_free_numeric(&numeric_);
      throw SingularMatrixError(row, "singular matrix: zero pivot at row " + std::to_string(row));
    }
    if (status != UMFPACK_OK) throw std::runtime_error("UMFPACK numeric factorization failed: " + std::to_string(status));
  }

  SparseLu(const SparseLu&) = delete;
  SparseLu& operator=(const SparseLu&) = delete;
  SparseLu(SparseLu&& other) noexcept : matrix_(std::move(other.matrix_)), numeric_(other.numeric_) {
    std::copy(std::begin(other.control_), std::end(other.control_), std::begin(control_));
    other.numeric_ = nullptr;
  }
  ~SparseLu() {
    if (numeric_) umfpack_di_free_numeric(&numeric_);
  }

  std::vector<double> solve(std::span<const double> rhs) const {
    if (static_cast<Index>(rhs.size()) != matrix_.rows()) throw std::invalid_argument("SparseLu::solve: size mismatch");
    std::vector<double> x(rhs.size(), 0.0);
    int status = umfpack_di_solve(UMFPACK_At, matrix_.offsets().data(), matrix_.col_indices().data(),
                                  matrix_.values().data(), x.data(), rhs.data(), numeric_, control_, nullptr);
    if (status != UMFPACK_OK) throw std::runtime_error("UMFPACK solve failed: " + std::to_string(status));
    return x;
  }

 private:
  Index first_zero_pivot_row() const {
    int lnz = 0, unz = 0, n_row = 0, n_col = 0, nz_udiag = 0;
    umfpack_di_get_lunz(&lnz, &unz, &n_row, &n_col, &nz_udiag, numeric_);
    std::vector<int> p(n_row), q(n_col);
    std::vector<double> udiag(std::min(n_row, n_col));
    int do_recip = 0;
    umfpack_di_get_numeric(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, p.data(), q.data(), udiag.data(),
                           &do_recip, nullptr, numeric_);
    // Pivot k eliminates column q[k] of the transpose, i.e. row q[k] of ours.
    for (std::size_t k = 0; k < udiag.size(); ++k)
      if (udiag[k] == 0.0) return q[k];
    return 0;
  }

  CsrMatrix matrix_;
  void* numeric_ = nullptr;
  double control_[UMFPACK_CONTROL];
};

/// One-shot direct solve.
inline std::vector<double> sparse_solve(const CsrMatrix& m, std::span<const double> rhs) {
  return SparseLu(m).solve(rhs);
}

/// Relative residual ||M x - b|| / (||M||_inf ||x|| + ||b||).
inline double relative_residual(const CsrMatrix& m, std::span<const double> x, std::span<const double> b) {
  auto r = m.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  const double scale = m.norm_inf() * norm2(x) + norm2(b);
  return scale > 0.0 ? norm2(r) / scale : norm2(r);
}

}  // namespace afcest
