#include <doctest.h>

#include "faithtrace/numkernel.hpp"
#include "faithtrace/rng.hpp"
#include "support/oracles.hpp"

using namespace faithtrace;

TEST_CASE("normalize scales by the reciprocal norm") {
  const FeatureVector out = normalize({3.0, 4.0});
  CHECK(out[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(0.8).epsilon(1e-15));

  const FeatureVector unit = normalize({1.0, 0.0, 0.0});
  CHECK(unit == FeatureVector{1.0, 0.0, 0.0});
}

TEST_CASE("normalize rejects near-zero vectors") {
  CHECK_THROWS_AS(normalize({0.0, 0.0}), Error);
  try {
    normalize({0.0, 0.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroNorm);
  }
  CHECK_THROWS_AS(normalize({}), Error);
}

TEST_CASE("normalize yields unit norm for random vectors") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.uniform_index(40);
    FeatureVector v = oracles::random_vector(rng, n);
    if (l2_norm(v) <= 1e-6) continue;
    CHECK(std::abs(l2_norm(normalize(v)) - 1.0) <= 1e-12);
  }
}

TEST_CASE("cosine matches hand values and the derived constant") {
  CHECK(cosine({1.0, 0.0}, {0.0, 1.0}) == 0.0);
  CHECK(cosine({2.0, 0.0}, {5.0, 0.0}) == 1.0);
  // 1/sqrt(2) evaluated independently at high precision.
  CHECK(std::abs(cosine({1.0, 1.0}, {1.0, 0.0}) - 0.7071067811865475) <= 1e-15);
}

TEST_CASE("cosine errors") {
  CHECK_THROWS_AS(cosine({1.0, 2.0}, {1.0}), Error);
  try {
    cosine({1.0, 2.0}, {1.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimMismatch);
  }
  try {
    cosine({0.0, 0.0}, {1.0, 0.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroNorm);
  }
}

TEST_CASE("cosine is symmetric and scale-invariant") {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.uniform_index(30);
    const FeatureVector a = oracles::random_vector(rng, n);
    const FeatureVector b = oracles::random_vector(rng, n);
    if (l2_norm(a) < 1e-6 || l2_norm(b) < 1e-6) continue;
    CHECK(std::abs(cosine(a, b) - cosine(b, a)) <= 1e-15);

    const double alpha = 0.01 + 10.0 * rng.uniform01();
    const double beta = 0.01 + 10.0 * rng.uniform01();
    FeatureVector a_scaled = a, b_scaled = b;
    for (double& x : a_scaled) x *= alpha;
    for (double& x : b_scaled) x *= beta;
    CHECK(std::abs(cosine(a_scaled, b_scaled) - cosine(a, b)) <= 1e-12);
  }
}

TEST_CASE("matvec agrees with the naive oracle") {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const std::size_t rows = 1 + rng.uniform_index(12);
    const std::size_t cols = 1 + rng.uniform_index(12);
    const FeatureMatrix m = oracles::random_matrix(rng, rows, cols);
    const FeatureVector v = oracles::random_vector(rng, cols);
    const FeatureVector got = matvec(m, v);
    const FeatureVector want = oracles::naive_matvec(m, v);
    for (std::size_t r = 0; r < rows; ++r) {
      CHECK(got[r] == doctest::Approx(want[r]).epsilon(1e-14));
    }
  }
}

TEST_CASE("matvec_transposed is the adjoint of matvec") {
  Rng rng(14);
  for (int i = 0; i < 50; ++i) {
    const std::size_t rows = 1 + rng.uniform_index(10);
    const std::size_t cols = 1 + rng.uniform_index(10);
    const FeatureMatrix m = oracles::random_matrix(rng, rows, cols);
    const FeatureVector x = oracles::random_vector(rng, cols);
    const FeatureVector y = oracles::random_vector(rng, rows);
    // <M x, y> == <x, M^T y>
    CHECK(dot(matvec(m, x), y) == doctest::Approx(dot(x, matvec_transposed(m, y))).epsilon(1e-12));
  }
}

TEST_CASE("require_finite reports the offending index") {
  FeatureVector bad = {1.0, std::nan(""), 2.0};
  try {
    require_finite(bad, "test vector");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}
