#include "faithtrace/influence.hpp"

#include <cmath>

namespace faithtrace {

void validate(const InfluenceConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !(cfg.fd_delta > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "influence config requires strictly positive epsilon and fd_delta");
  }
}

DirectionVector direction_closed_form(const AffineAligner& aligner,
                                      const FeatureVector& z,
                                      const FeatureVector& t_hat) {
  const FeatureVector aligned = aligner.apply(z);
  const double norm = l2_norm(aligned);
  if (norm < kZeroNormThreshold) {
    throw Error(ErrorKind::ZeroNorm, "aligned feature has near-zero norm; "
                                     "text-induced direction is undefined here");
  }
  if (t_hat.size() != aligned.size()) {
    throw Error(ErrorKind::DimMismatch, "text embedding length " +
                                            std::to_string(t_hat.size()) +
                                            " vs aligned dim " +
                                            std::to_string(aligned.size()));
  }
  const double inv_norm = 1.0 / norm;
  const double s = dot(aligned, t_hat) * inv_norm;

  // W^T ((t_hat - s * h_hat) / ||h||)
  FeatureVector residual(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    residual[i] = (t_hat[i] - s * aligned[i] * inv_norm) * inv_norm;
  }
  DirectionVector out;
  out.raw = matvec_transposed(aligner.W, residual);
  out.similarity_at_point = s;
  const double raw_norm = l2_norm(out.raw);
  if (raw_norm < kZeroNormThreshold) {
    throw Error(ErrorKind::DegenerateDirection,
                "text-induced direction vanishes at this feature point");
  }
  out.unit = FeatureVector(out.raw.size());
  const double inv_raw = 1.0 / raw_norm;
  for (std::size_t i = 0; i < out.raw.size(); ++i) out.unit[i] = out.raw[i] * inv_raw;
  return out;
}

FeatureVector direction_finite_diff(const AffineAligner& aligner, const FeatureVector& z,
                                    const FeatureVector& t_hat, double delta) {
  if (!(delta > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "delta must be positive");
  }
  FeatureVector grad(z.size());
  FeatureVector probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    probe[i] = z[i] + delta;
    const double hi = similarity(aligner, probe, t_hat);
    probe[i] = z[i] - delta;
    const double lo = similarity(aligner, probe, t_hat);
    probe[i] = z[i];
    grad[i] = (hi - lo) / (2.0 * delta);
  }
  return grad;
}

double directional_score(const ClassifierHead& head, std::size_t c,
                         const FeatureVector& z, const DirectionVector& dir) {
  return dot(head.grad(z, c), dir.unit);
}

double influence_score(const ClassifierHead& head, std::size_t c, const FeatureVector& z,
                       const DirectionVector& dir, const InfluenceConfig& cfg) {
  validate(cfg);
  const double base = head.logits(z)[c];
  const double shifted = head.logits(axpy(z, cfg.epsilon, dir.unit))[c];
  return shifted - base;
}

}  // namespace faithtrace
