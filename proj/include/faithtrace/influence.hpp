#pragma once

#include "faithtrace/aligner.hpp"
#include "faithtrace/heads.hpp"
#include "faithtrace/numkernel.hpp"

namespace faithtrace {

// Feature-space direction induced by a text embedding: the gradient of the
// joint-space cosine similarity with respect to the classifier feature.
struct DirectionVector {
  FeatureVector raw;           // gradient of the similarity at z
  FeatureVector unit;          // raw scaled to unit norm
  double similarity_at_point;  // cosine of aligned feature with the text
};

struct InfluenceConfig {
  double epsilon = 1.0;    // finite step for the exact influence score
  double fd_delta = 1e-5;  // probe step for finite-difference checks
};

void validate(const InfluenceConfig& cfg);

// Closed-form gradient of s(W z + b, t_hat) w.r.t. z:
//   raw = W^T (t_hat - s * h_hat) / ||W z + b||,  h_hat = (W z + b) normalized.
// Throws ZeroNorm when the aligned feature is degenerate and
// DegenerateDirection when ||raw|| < kZeroNormThreshold (t_hat parallel to
// the aligned feature with no off-component; such concepts add no
// feature-space direction and are excluded from ranking by callers).
DirectionVector direction_closed_form(const AffineAligner& aligner,
                                      const FeatureVector& z,
                                      const FeatureVector& t_hat);

// Coordinate-wise central difference of the similarity w.r.t. z. The oracle
// for direction_closed_form; used by tests and the CLI --verify mode.
FeatureVector direction_finite_diff(const AffineAligner& aligner, const FeatureVector& z,
                                    const FeatureVector& t_hat, double delta);

// Directional derivative of logit c along dir.unit: grad_z g_c(z) . unit.
double directional_score(const ClassifierHead& head, std::size_t c,
                         const FeatureVector& z, const DirectionVector& dir);

// Exact finite influence g_c(z + epsilon * unit) - g_c(z).
double influence_score(const ClassifierHead& head, std::size_t c, const FeatureVector& z,
                       const DirectionVector& dir, const InfluenceConfig& cfg);

}  // namespace faithtrace
