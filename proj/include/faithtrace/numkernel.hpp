#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "faithtrace/error.hpp"

namespace faithtrace {

// All in-memory arithmetic is 64-bit even where file formats carry 32-bit;
// gradient and finite-difference comparisons need the headroom.
using FeatureVector = std::vector<double>;

// Norms below this are treated as degenerate rather than rounding noise.
inline constexpr double kZeroNormThreshold = 1e-12;

// Dense row-major matrix. Rows x cols must always match values.size().
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  FeatureVector row(std::size_t r) const {
    return FeatureVector(values.begin() + static_cast<std::ptrdiff_t>(r * cols),
                         values.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  }
};

// Throws NonFinite naming `context` if any entry is NaN or infinite.
void require_finite(const FeatureVector& values, const std::string& context);
void require_finite(const FeatureMatrix& matrix, const std::string& context);

double l2_norm(const FeatureVector& v);

// Throws DimMismatch when sizes differ.
double dot(const FeatureVector& a, const FeatureVector& b);

// v scaled to unit L2 norm. Throws ZeroNorm when ||v|| < kZeroNormThreshold.
FeatureVector normalize(const FeatureVector& v);

// Cosine similarity, clamped to [-1, 1] against rounding.
// Throws DimMismatch or ZeroNorm (either argument near zero).
double cosine(const FeatureVector& a, const FeatureVector& b);

// M * v. Throws DimMismatch when v.size() != M.cols.
FeatureVector matvec(const FeatureMatrix& m, const FeatureVector& v);

// M^T * u. Throws DimMismatch when u.size() != M.rows.
FeatureVector matvec_transposed(const FeatureMatrix& m, const FeatureVector& u);

// a + s * b (element-wise). Throws DimMismatch.
FeatureVector axpy(const FeatureVector& a, double s, const FeatureVector& b);

}  // namespace faithtrace
