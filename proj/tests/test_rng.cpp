#include <catch2/catch_amalgamated.hpp>

#include "tscast/rng.hpp"

using namespace tscast;

TEST_CASE("identical seeds produce identical streams") {
  Rng a(987654321), b(987654321);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(5), d(5);
  for (int i = 0; i < 100; ++i) CHECK(c.gaussian(0.0, 1.0) == d.gaussian(0.0, 1.0));
}

TEST_CASE("different seeds differ within the first 10 draws") {
  Rng a(1), b(2);
  bool differ = false;
  for (int i = 0; i < 10 && !differ; ++i) differ = a.next_u64() != b.next_u64();
  CHECK(differ);
}

TEST_CASE("uniform01 stays in [0, 1)") {
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("init_weights") {
  SECTION("same seed twice gives identical matrices") {
    Rng a(99), b(99);
    const Matrix m1 = init_weights(5, 3, a);
    const Matrix m2 = init_weights(5, 3, b);
    for (std::size_t i = 0; i < m1.size(); ++i) CHECK(m1.data()[i] == m2.data()[i]);
  }
  SECTION("1000-draw sample mean near zero for cols = 1") {
    Rng rng(2024);
    const Matrix m = init_weights(1000, 1, rng);
    double mean = 0.0;
    for (double v : m.data()) mean += v;
    mean /= 1000.0;
    CHECK(std::abs(mean) < 0.05);
  }
  SECTION("entries bounded by 1/sqrt(cols)") {
    Rng rng(7);
    const Matrix m = init_weights(100, 4, rng);
    for (double v : m.data()) CHECK(std::abs(v) <= 0.5);
  }
  SECTION("zero dimension rejected") {
    Rng rng(1);
    CHECK_THROWS_AS(init_weights(0, 3, rng), ShapeError);
    CHECK_THROWS_AS(init_weights(3, 0, rng), ShapeError);
  }
}

TEST_CASE("gaussian moments are plausible") {
  Rng rng(31337);
  const int n = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.gaussian(1.0, 2.0);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == Catch::Approx(1.0).margin(0.06));
  CHECK(var == Catch::Approx(4.0).margin(0.2));
}
