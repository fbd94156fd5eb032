#include <doctest.h>

#include <cmath>

#include "fbcast/matrix.hpp"
#include "support.hpp"

using namespace fbcast;
using fbcast::testing::random_matrix;
using fbcast::testing::random_substochastic;

TEST_CASE("matrix construction validates entries") {
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), RejectedInputError);
  CHECK_THROWS_AS(Matrix(1, 1, {std::nan("")}), RejectedInputError);
  CHECK_THROWS_AS(Matrix(0, 3), RejectedInputError);
}

TEST_CASE("multiply basics") {
  Matrix m(2, 2, {1.0, 2.0, 3.0, 4.0});
  CHECK(max_abs_diff(multiply(Matrix::identity(2), m), m) == 0.0);

  Matrix swap(2, 2, {0.0, 1.0, 1.0, 0.0});
  CHECK(max_abs_diff(multiply(swap, swap), Matrix::identity(2)) == 0.0);

  CHECK_THROWS_AS(multiply(Matrix(2, 3), Matrix(2, 3)), RejectedInputError);
}

TEST_CASE("multiply transpose identity") {
  Xoshiro256 rng(11);
  Matrix a = random_matrix(rng, 3, 3), b = random_matrix(rng, 3, 3);
  Matrix ab = multiply(a, b);
  auto transpose = [](const Matrix& m) {
    Matrix t(m.cols(), m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
  };
  CHECK(max_abs_diff(transpose(ab), multiply(transpose(b), transpose(a))) <=
        1e-12);
}

TEST_CASE("power basics and oracle") {
  Matrix swap(2, 2, {0.0, 1.0, 1.0, 0.0});
  CHECK(max_abs_diff(power(swap, 1), swap) == 0.0);
  CHECK(max_abs_diff(power(swap, 2), Matrix::identity(2)) == 0.0);
  CHECK(max_abs_diff(power(swap, 0), Matrix::identity(2)) == 0.0);
  CHECK_THROWS_AS(power(Matrix(2, 3), 2), RejectedInputError);

  Xoshiro256 rng(5);
  Matrix a = random_substochastic(rng, 3, 1.0);
  Matrix sequential = Matrix::identity(3);
  for (int i = 0; i < 4; ++i) sequential = multiply(sequential, a);
  CHECK(max_abs_diff(power(a, 4), sequential) <= 1e-12);
}

TEST_CASE("power additivity for contracting matrices") {
  Xoshiro256 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_substochastic(rng, 4, 0.95);
    const unsigned m = 1 + static_cast<unsigned>(rng.next_u64() % 6);
    const unsigned n = 1 + static_cast<unsigned>(rng.next_u64() % 6);
    Matrix lhs = power(a, m + n);
    Matrix rhs = multiply(power(a, m), power(a, n));
    const double scale = std::max(lhs.max_abs(), 1e-30);
    CHECK(max_abs_diff(lhs, rhs) / scale <= 1e-10);
  }
}

TEST_CASE("hadamard") {
  Matrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  Matrix b(2, 2, {5.0, 6.0, 7.0, 8.0});
  Matrix expect(2, 2, {5.0, 12.0, 21.0, 32.0});
  CHECK(max_abs_diff(hadamard(a, b), expect) == 0.0);
  CHECK(hadamard(Matrix(2, 2, 0.0), a).max_abs() == 0.0);
  CHECK_THROWS_AS(hadamard(Matrix(2, 3), Matrix(3, 2)), RejectedInputError);
}

TEST_CASE("inverse basics") {
  Matrix d(2, 2, {2.0, 0.0, 0.0, 4.0});
  Matrix expect(2, 2, {0.5, 0.0, 0.0, 0.25});
  CHECK(max_abs_diff(inverse(d), expect) <= 1e-15);
  CHECK(max_abs_diff(inverse(Matrix::identity(3)), Matrix::identity(3)) == 0.0);
  CHECK_THROWS_AS(inverse(Matrix(2, 2, {1.0, 1.0, 1.0, 1.0})),
                  SingularMatrixError);
  CHECK_THROWS_AS(inverse(Matrix(2, 3)), RejectedInputError);
}

TEST_CASE("inverse of random well-conditioned matrices") {
  Xoshiro256 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_matrix(rng, 5, 5, -1.0, 1.0);
    for (std::size_t i = 0; i < 5; ++i) a(i, i) += 5.0;  // diagonally dominant
    CHECK(max_abs_diff(multiply(inverse(a), a), Matrix::identity(5)) <= 1e-9);
  }
}

TEST_CASE("geometric tail") {
  Matrix a1(1, 1, {1.0});
  Matrix q1(1, 1, {0.5});
  CHECK(geometric_tail(2, a1, q1)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(geometric_tail(3, a1, q1)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(geometric_tail(1, a1, q1), RejectedInputError);
  CHECK_THROWS_AS(geometric_tail(2, Matrix(2, 2), q1), RejectedInputError);

  // n = 2 is exactly A * Q.
  Xoshiro256 rng(3);
  Matrix a = random_matrix(rng, 3, 3), q = random_matrix(rng, 3, 3);
  CHECK(max_abs_diff(geometric_tail(2, a, q), multiply(a, q)) <= 1e-15);

  // Scalar decay (n-1) q^(n-1), monotone for n >= 4.
  double prev = geometric_tail(4, a1, q1)(0, 0);
  for (unsigned n = 5; n <= 12; ++n) {
    const double cur = geometric_tail(n, a1, q1)(0, 0);
    CHECK(cur == doctest::Approx((n - 1) * std::pow(0.5, n - 1)));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("geometric tail vanishes for substochastic Q") {
  Xoshiro256 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix q = random_substochastic(rng, 4, 0.9);
    Matrix a = random_matrix(rng, 4, 4);
    CHECK(geometric_tail(50, a, q).max_abs() <= 1e-3);
    CHECK(geometric_tail(200, a, q).max_abs() <= 1e-10);
  }
}

TEST_CASE("matrix text round trip") {
  Xoshiro256 rng(41);
  Matrix m = random_matrix(rng, 3, 4, -10.0, 10.0);
  Matrix back = matrix_from_text(to_text(m));
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 4);
  CHECK(max_abs_diff(m, back) <= 1e-12 * m.max_abs());
  CHECK_THROWS_AS(matrix_from_text("2 -1\n"), RejectedInputError);
  CHECK_THROWS_AS(matrix_from_text("2 2\n1 2 3\n"), RejectedInputError);
}
