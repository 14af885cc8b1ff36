#include <catch2/catch_amalgamated.hpp>

#include "tscast/activations.hpp"
#include "tscast/matrix.hpp"
#include "tscast/rng.hpp"

using namespace tscast;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -2.0,
                     double hi = 2.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

// Independent reference product: plain triple loop.
Matrix matmul_reference(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      out(i, j) = sum;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("matmul identity") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  const Matrix out = matmul(a, eye);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(1, 0) == 3.0);
  CHECK(out(1, 1) == 4.0);
}

TEST_CASE("matmul 1x2 by 2x1") {
  const Matrix a = Matrix::from_rows({{1, 2}});
  const Matrix b = Matrix::from_rows({{3}, {4}});
  const Matrix out = matmul(a, b);
  REQUIRE(out.rows() == 1);
  REQUIRE(out.cols() == 1);
  CHECK(out(0, 0) == 11.0);
}

TEST_CASE("matmul matches triple-loop reference") {
  Rng rng(123);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);
  const Matrix got = matmul(a, b);
  const Matrix want = matmul_reference(a, b);
  for (std::size_t i = 0; i < got.rows(); ++i)
    for (std::size_t j = 0; j < got.cols(); ++j)
      CHECK(got(i, j) == Catch::Approx(want(i, j)).margin(1e-12));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Matrix a(2, 3);
  const Matrix b(4, 2);
  CHECK_THROWS_MATCHES(matmul(a, b), ShapeError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("(2x3)") &&
                           Catch::Matchers::ContainsSubstring("(4x2)")));
}

TEST_CASE("matmul associativity on random 2x2 chains") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(2, 2, rng);
    const Matrix b = random_matrix(2, 2, rng);
    const Matrix c = random_matrix(2, 2, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        CHECK(left(i, j) == Catch::Approx(right(i, j)).margin(1e-10));
  }
}

TEST_CASE("non-finite results are rejected") {
  Matrix huge(1, 1, 1e308);
  const Matrix two(1, 1, 10.0);
  CHECK_THROWS_AS(matmul(huge, two), NumericError);
  CHECK_THROWS_AS(hadamard(huge, huge), NumericError);
}

TEST_CASE("sigmoid") {
  SECTION("zero maps to one half") {
    const Matrix out = sigmoid(Matrix(2, 2, 0.0));
    for (double v : out.data()) CHECK(v == 0.5);
  }
  SECTION("saturates without overflow") {
    const Matrix out = sigmoid(Matrix(1, 2, 500.0));
    for (double v : out.data()) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      CHECK(std::isfinite(v));
    }
    const Matrix low = sigmoid(Matrix(1, 2, -500.0));
    for (double v : low.data()) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
  }
  SECTION("matches direct evaluation at 1") {
    const Matrix out = sigmoid(Matrix(1, 1, 1.0));
    CHECK(out(0, 0) == Catch::Approx(1.0 / (1.0 + std::exp(-1.0))).margin(1e-15));
  }
  SECTION("sigmoid(x) + sigmoid(-x) == 1") {
    Rng rng(11);
    const Matrix x = random_matrix(4, 5, rng, -30.0, 30.0);
    const Matrix plus = sigmoid(x);
    const Matrix minus = sigmoid(scale(x, -1.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(plus.data()[i] + minus.data()[i] == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("tanh") {
  SECTION("odd function through zero") {
    CHECK(tscast::tanh(Matrix(1, 1, 0.0))(0, 0) == 0.0);
    Rng rng(13);
    const Matrix x = random_matrix(3, 3, rng);
    const Matrix pos = tscast::tanh(x);
    const Matrix neg = tscast::tanh(scale(x, -1.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(pos.data()[i] == Catch::Approx(-neg.data()[i]).margin(1e-15));
    }
  }
  SECTION("matches direct evaluation at 1") {
    const double e = std::exp(1.0);
    const double want = (e - 1.0 / e) / (e + 1.0 / e);
    CHECK(tscast::tanh(Matrix(1, 1, 1.0))(0, 0) == Catch::Approx(want).margin(1e-15));
  }
  SECTION("tanh(x) == 2 sigmoid(2x) - 1") {
    Rng rng(17);
    const Matrix x = random_matrix(4, 4, rng, -5.0, 5.0);
    const Matrix direct = tscast::tanh(x);
    const Matrix via = map(sigmoid(scale(x, 2.0)), [](double v) { return 2.0 * v - 1.0; });
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(direct.data()[i] == Catch::Approx(via.data()[i]).margin(1e-10));
    }
  }
}
