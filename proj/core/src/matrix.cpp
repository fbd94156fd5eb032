#include "fbcast/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace fbcast {

namespace {

constexpr double kSingularPivot = 1e-12;

void check_finite(const std::vector<double>& entries) {
  for (double v : entries) {
    if (!std::isfinite(v)) {
      throw RejectedInputError("matrix entries must be finite");
    }
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), entries_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw RejectedInputError("matrix dimensions must be positive");
  }
  check_finite(entries_);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows == 0 || cols == 0) {
    throw RejectedInputError("matrix dimensions must be positive");
  }
  if (entries_.size() != rows * cols) {
    throw RejectedInputError("entry count does not match rows*cols");
  }
  check_finite(entries_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double Matrix::max_abs() const {
  double best = 0.0;
  for (double v : entries_) best = std::max(best, std::fabs(v));
  return best;
}

double Matrix::row_sum(std::size_t r) const {
  double s = 0.0;
  for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c);
  return s;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw RejectedInputError("multiply: inner dimensions differ");
  }
  Matrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw RejectedInputError("add: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += b(i, j);
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw RejectedInputError("subtract: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) -= b(i, j);
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= s;
  return out;
}

Matrix power(const Matrix& a, unsigned n) {
  if (a.rows() != a.cols()) {
    throw RejectedInputError("power: matrix must be square");
  }
  Matrix result = Matrix::identity(a.rows());
  Matrix base = a;
  unsigned e = n;
  while (e > 0) {
    if (e & 1u) result = multiply(result, base);
    e >>= 1u;
    if (e > 0) base = multiply(base, base);
  }
  return result;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw RejectedInputError("hadamard: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= b(i, j);
  return out;
}

Matrix inverse(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw RejectedInputError("inverse: matrix must be square");
  }
  const std::size_t n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(work(r, col)) > std::fabs(work(pivot, col))) pivot = r;
    }
    if (std::fabs(work(pivot, col)) < kSingularPivot) {
      throw SingularMatrixError("inverse: singular matrix");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(pivot, j), work(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    }
    const double d = work(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(r, j) -= f * work(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

Matrix geometric_tail(unsigned n, const Matrix& a, const Matrix& q) {
  if (a.rows() != a.cols() || q.rows() != q.cols() || a.rows() != q.rows()) {
    throw RejectedInputError("geometric_tail: need square matrices of equal size");
  }
  if (n < 2) throw RejectedInputError("geometric_tail: n must be >= 2");
  // left = Q^i A, accumulated; right = Q^{n-i-1}.
  Matrix sum(a.rows(), a.cols(), 0.0);
  Matrix left = a;
  for (unsigned i = 0; i + 2 <= n; ++i) {
    sum = add(sum, multiply(left, power(q, n - i - 1)));
    left = multiply(q, left);
  }
  return sum;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw RejectedInputError("max_abs_diff: shape mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      best = std::max(best, std::fabs(a(i, j) - b(i, j)));
  return best;
}

std::string to_text(const Matrix& m) {
  std::ostringstream out;
  out.precision(15);
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
  return out.str();
}

Matrix matrix_from_text(std::istream& in) {
  long long rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows <= 0 || cols <= 0) {
    throw RejectedInputError("matrix text: bad header");
  }
  std::vector<double> entries;
  entries.reserve(static_cast<std::size_t>(rows * cols));
  for (long long i = 0; i < rows * cols; ++i) {
    double v = 0.0;
    if (!(in >> v)) throw RejectedInputError("matrix text: missing entries");
    entries.push_back(v);
  }
  return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                std::move(entries));
}

Matrix matrix_from_text(const std::string& text) {
  std::istringstream in(text);
  return matrix_from_text(in);
}

}  // namespace fbcast
