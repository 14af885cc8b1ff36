#include <catch2/catch_amalgamated.hpp>

#include "tscast/gradcheck.hpp"

using namespace tscast;

TEST_CASE("finite differences on sum of squares") {
  auto f = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return s;
  };
  const Matrix grad = finite_difference_grad(f, Matrix(1, 1, 3.0), 1e-5);
  CHECK(grad(0, 0) == Catch::Approx(6.0).margin(1e-6));
}

TEST_CASE("finite differences on a constant are zero") {
  auto f = [](const Matrix&) { return 4.25; };
  const Matrix grad = finite_difference_grad(f, Matrix(2, 3, 1.0));
  for (double v : grad.data()) CHECK(v == 0.0);
}

TEST_CASE("non-finite objective is rejected") {
  auto f = [](const Matrix& m) { return 1.0 / (m(0, 0) - m(0, 0)); };
  CHECK_THROWS_AS(finite_difference_grad(f, Matrix(1, 1, 1.0)), NumericError);
}

TEST_CASE("eps must be positive") {
  auto f = [](const Matrix&) { return 0.0; };
  CHECK_THROWS_AS(finite_difference_grad(f, Matrix(1, 1, 1.0), 0.0), NumericError);
}
