#include "faithtrace/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "faithtrace/jsonio.hpp"

namespace faithtrace {

namespace {

// In-place Cholesky factorization G = L L^T for a symmetric matrix stored
// row-major. Throws SingularSystem when a pivot collapses relative to the
// matrix scale, which with ridge = 0 signals rank-deficient data.
void cholesky_factor(FeatureMatrix& g) {
  const std::size_t n = g.rows;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(g.at(i, i)));
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

  for (std::size_t k = 0; k < n; ++k) {
    double pivot = g.at(k, k);
    for (std::size_t j = 0; j < k; ++j) pivot -= g.at(k, j) * g.at(k, j);
    if (!(pivot > tol)) {
      throw Error(ErrorKind::SingularSystem,
                  "normal equations not positive definite at pivot " + std::to_string(k));
    }
    const double root = std::sqrt(pivot);
    g.at(k, k) = root;
    for (std::size_t i = k + 1; i < n; ++i) {
      double sum = g.at(i, k);
      for (std::size_t j = 0; j < k; ++j) sum -= g.at(i, j) * g.at(k, j);
      g.at(i, k) = sum / root;
    }
  }
}

// Solves L L^T x = rhs given the factor from cholesky_factor.
FeatureVector cholesky_solve(const FeatureMatrix& l, const FeatureVector& rhs) {
  const std::size_t n = l.rows;
  FeatureVector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = rhs[i];
    for (std::size_t j = 0; j < i; ++j) sum -= l.at(i, j) * y[j];
    y[i] = sum / l.at(i, i);
  }
  FeatureVector x(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = y[ii];
    for (std::size_t j = ii + 1; j < n; ++j) sum -= l.at(j, ii) * x[j];
    x[ii] = sum / l.at(ii, ii);
  }
  return x;
}

}  // namespace

AffineAligner train_aligner(const AlignmentDataset& data, double ridge) {
  const std::size_t n = data.features.rows;
  const std::size_t d = data.features.cols;
  const std::size_t m = data.targets.cols;
  if (n == 0 || data.targets.rows != n) {
    throw Error(ErrorKind::DimMismatch,
                "feature rows " + std::to_string(n) + " vs target rows " +
                    std::to_string(data.targets.rows));
  }
  if (ridge < 0.0 || !std::isfinite(ridge)) {
    throw Error(ErrorKind::InvalidArgument, "ridge must be finite and nonnegative");
  }
  require_finite(data.features, "alignment features");
  require_finite(data.targets, "alignment targets");

  // Gram matrix of the feature rows augmented with a constant-1 column.
  const std::size_t da = d + 1;
  FeatureMatrix gram(da, da, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double* z = data.features.values.data() + s * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) gram.at(i, j) += z[i] * z[j];
      gram.at(i, d) += z[i];
    }
  }
  gram.at(d, d) = static_cast<double>(n);
  for (std::size_t i = 0; i < da; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram.at(i, j) = gram.at(j, i);
    gram.at(i, i) += ridge;
  }

  // Right-hand sides X_aug^T Y, one column per output dimension.
  FeatureMatrix rhs(da, m, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double* z = data.features.values.data() + s * d;
    const double* t = data.targets.values.data() + s * m;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < m; ++j) rhs.at(i, j) += z[i] * t[j];
    }
    for (std::size_t j = 0; j < m; ++j) rhs.at(d, j) += t[j];
  }

  cholesky_factor(gram);

  AffineAligner out;
  out.W = FeatureMatrix(m, d);
  out.b = FeatureVector(m, 0.0);
  FeatureVector column(da, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < da; ++i) column[i] = rhs.at(i, j);
    const FeatureVector theta = cholesky_solve(gram, column);
    for (std::size_t i = 0; i < d; ++i) out.W.at(j, i) = theta[i];
    out.b[j] = theta[d];
  }
  require_finite(out.W, "trained aligner W");
  require_finite(out.b, "trained aligner b");
  return out;
}

FeatureVector AffineAligner::apply(const FeatureVector& z) const {
  FeatureVector out = matvec(W, z);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double similarity(const AffineAligner& aligner, const FeatureVector& z,
                  const FeatureVector& t_hat) {
  const FeatureVector aligned = aligner.apply(z);
  const double norm = l2_norm(aligned);
  if (norm < kZeroNormThreshold) {
    throw Error(ErrorKind::ZeroNorm, "aligned feature has near-zero norm; "
                                     "text-induced direction is undefined here");
  }
  return dot(aligned, t_hat) / norm;
}

double mean_squared_error(const AffineAligner& aligner, const AlignmentDataset& data) {
  const std::size_t n = data.features.rows;
  if (n == 0) throw Error(ErrorKind::EmptyInput, "empty dataset");
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const FeatureVector mapped = aligner.apply(data.features.row(s));
    const FeatureVector target = data.targets.row(s);
    double sq = 0.0;
    for (std::size_t i = 0; i < mapped.size(); ++i) {
      const double r = mapped[i] - target[i];
      sq += r * r;
    }
    total += sq;
  }
  return total / static_cast<double>(n);
}

nlohmann::json aligner_to_json(const AffineAligner& aligner) {
  nlohmann::json j;
  j["dim_in"] = aligner.dim_in();
  j["dim_out"] = aligner.dim_out();
  nlohmann::json w = nlohmann::json::array();
  for (double x : aligner.W.values) w.push_back(x);
  j["W"] = std::move(w);
  j["b"] = vector_to_json(aligner.b);
  return j;
}

AffineAligner aligner_from_json(const nlohmann::json& j) {
  for (const char* key : {"dim_in", "dim_out", "W", "b"}) {
    if (!j.contains(key)) {
      throw Error(ErrorKind::ParseError, std::string("aligner JSON missing key ") + key);
    }
  }
  AffineAligner out;
  const auto d = j.at("dim_in").get<std::size_t>();
  const auto m = j.at("dim_out").get<std::size_t>();
  out.W.rows = m;
  out.W.cols = d;
  out.W.values = vector_from_json(j.at("W"), "aligner W");
  out.b = vector_from_json(j.at("b"), "aligner b");
  if (out.W.values.size() != m * d || out.b.size() != m) {
    throw Error(ErrorKind::DimMismatch, "aligner JSON shape mismatch");
  }
  return out;
}

void save_aligner(const std::filesystem::path& path, const AffineAligner& aligner) {
  write_json_file(path, aligner_to_json(aligner));
}

AffineAligner load_aligner(const std::filesystem::path& path) {
  return aligner_from_json(read_json_file(path));
}

}  // namespace faithtrace
