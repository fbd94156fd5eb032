#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "fbcast/errors.hpp"

namespace fbcast {

// Dense real matrix, row-major. Entries are validated finite on construction.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const {
    return entries_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return entries_[r * cols_ + c];
  }

  const std::vector<double>& entries() const { return entries_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double max_abs() const;
  double row_sum(std::size_t r) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// A^n with A^0 = I, by repeated squaring.
Matrix power(const Matrix& a, unsigned n);

// Entrywise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

// Gaussian elimination with partial pivoting; pivots below 1e-12 are
// treated as singular.
Matrix inverse(const Matrix& a);

// g(n, A, Q) = sum_{i=0}^{n-2} Q^i A Q^{n-i-1}, n >= 2.
Matrix geometric_tail(unsigned n, const Matrix& a, const Matrix& q);

double max_abs_diff(const Matrix& a, const Matrix& b);

// Text format: first line "rows cols", then one line per row of entries
// emitted with 15 significant digits.
std::string to_text(const Matrix& m);
Matrix matrix_from_text(std::istream& in);
Matrix matrix_from_text(const std::string& text);

}  // namespace fbcast
