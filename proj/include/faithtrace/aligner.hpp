#pragma once

#include <filesystem>

#include <json.hpp>

#include "faithtrace/numkernel.hpp"

namespace faithtrace {

// Affine map from classifier feature space (dim_in) into the joint
// vision-language embedding space (dim_out): z -> W z + b.
struct AffineAligner {
  FeatureMatrix W;  // dim_out x dim_in
  FeatureVector b;  // dim_out

  std::size_t dim_in() const { return W.cols; }
  std::size_t dim_out() const { return W.rows; }

  // W z + b. Throws DimMismatch.
  FeatureVector apply(const FeatureVector& z) const;
};

// Paired rows: features[i] is a classifier feature, targets[i] the image
// embedding it should map onto.
struct AlignmentDataset {
  FeatureMatrix features;  // n x d
  FeatureMatrix targets;   // n x m
};

inline constexpr double kDefaultRidge = 1e-8;

// Least-squares fit of W, b minimizing the mean squared residual over the
// dataset. Solved through the normal equations on features augmented with a
// constant-1 column; `ridge` is added to the diagonal. With ridge = 0 and
// full-rank augmented features this is the exact minimizer.
// Throws SingularSystem when the system is numerically unsolvable and
// NonFinite on bad input.
AffineAligner train_aligner(const AlignmentDataset& data, double ridge = kDefaultRidge);

// Cosine of the aligned feature with a unit text embedding. Throws ZeroNorm
// when ||W z + b|| falls under kZeroNormThreshold.
double similarity(const AffineAligner& aligner, const FeatureVector& z,
                  const FeatureVector& t_hat);

// Mean over samples of the squared residual ||W z + b - target||^2.
double mean_squared_error(const AffineAligner& aligner, const AlignmentDataset& data);

nlohmann::json aligner_to_json(const AffineAligner& aligner);
AffineAligner aligner_from_json(const nlohmann::json& j);
void save_aligner(const std::filesystem::path& path, const AffineAligner& aligner);
AffineAligner load_aligner(const std::filesystem::path& path);

}  // namespace faithtrace
