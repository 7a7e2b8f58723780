#include "faithtrace/numkernel.hpp"

#include <algorithm>
#include <cmath>

namespace faithtrace {

void require_finite(const FeatureVector& values, const std::string& context) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::NonFinite,
                  context + " has non-finite entry at index " + std::to_string(i));
    }
  }
}

void require_finite(const FeatureMatrix& matrix, const std::string& context) {
  if (matrix.values.size() != matrix.rows * matrix.cols) {
    throw Error(ErrorKind::DimMismatch,
                context + " shape " + std::to_string(matrix.rows) + "x" +
                    std::to_string(matrix.cols) + " does not match value count " +
                    std::to_string(matrix.values.size()));
  }
  for (std::size_t i = 0; i < matrix.values.size(); ++i) {
    if (!std::isfinite(matrix.values[i])) {
      throw Error(ErrorKind::NonFinite,
                  context + " has non-finite entry at flat index " + std::to_string(i));
    }
  }
}

double l2_norm(const FeatureVector& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double dot(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimMismatch, "dot of length " + std::to_string(a.size()) +
                                            " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

FeatureVector normalize(const FeatureVector& v) {
  const double norm = l2_norm(v);
  if (norm < kZeroNormThreshold) {
    throw Error(ErrorKind::ZeroNorm, "cannot normalize vector with norm " +
                                         std::to_string(norm));
  }
  FeatureVector out(v.size());
  const double inv = 1.0 / norm;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimMismatch, "cosine of length " + std::to_string(a.size()) +
                                            " vs " + std::to_string(b.size()));
  }
  const double norm_a = l2_norm(a);
  const double norm_b = l2_norm(b);
  if (norm_a < kZeroNormThreshold || norm_b < kZeroNormThreshold) {
    throw Error(ErrorKind::ZeroNorm, "cosine undefined for near-zero vector");
  }
  const double value = dot(a, b) / (norm_a * norm_b);
  return std::clamp(value, -1.0, 1.0);
}

FeatureVector matvec(const FeatureMatrix& m, const FeatureVector& v) {
  if (v.size() != m.cols) {
    throw Error(ErrorKind::DimMismatch, "matvec: " + std::to_string(m.rows) + "x" +
                                            std::to_string(m.cols) + " times length " +
                                            std::to_string(v.size()));
  }
  FeatureVector out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double sum = 0.0;
    const double* row = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) sum += row[c] * v[c];
    out[r] = sum;
  }
  return out;
}

FeatureVector matvec_transposed(const FeatureMatrix& m, const FeatureVector& u) {
  if (u.size() != m.rows) {
    throw Error(ErrorKind::DimMismatch, "matvec_transposed: " + std::to_string(m.rows) +
                                            "x" + std::to_string(m.cols) +
                                            " transposed times length " +
                                            std::to_string(u.size()));
  }
  FeatureVector out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double scale = u[r];
    const double* row = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += scale * row[c];
  }
  return out;
}

FeatureVector axpy(const FeatureVector& a, double s, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimMismatch, "axpy of length " + std::to_string(a.size()) +
                                            " vs " + std::to_string(b.size()));
  }
  FeatureVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

}  // namespace faithtrace
