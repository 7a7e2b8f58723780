#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithtrace/numkernel.hpp"

namespace faithtrace {

// Evaluable, differentiable map from feature space to class logits with
// per-class gradient access. Implementations are immutable after
// construction and safe to share across evaluation workers.
class ClassifierHead {
 public:
  virtual ~ClassifierHead() = default;

  virtual std::size_t num_classes() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual FeatureVector logits(const FeatureVector& z) const = 0;

  // Gradient of logit c with respect to z. Throws InvalidClass, DimMismatch.
  virtual FeatureVector grad(const FeatureVector& z, std::size_t c) const = 0;

  virtual const std::vector<std::string>& class_names() const = 0;
  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_input(const FeatureVector& z, std::size_t c) const;
  void check_input(const FeatureVector& z) const;
};

// Logits = W z + bias; grad(z, c) is row c of W.
class LinearHead final : public ClassifierHead {
 public:
  LinearHead(FeatureMatrix weights, FeatureVector bias,
             std::vector<std::string> class_names);

  std::size_t num_classes() const override { return weights_.rows; }
  std::size_t feature_dim() const override { return weights_.cols; }
  FeatureVector logits(const FeatureVector& z) const override;
  FeatureVector grad(const FeatureVector& z, std::size_t c) const override;
  const std::vector<std::string>& class_names() const override { return names_; }
  nlohmann::json to_json() const override;

  const FeatureMatrix& weights() const { return weights_; }
  const FeatureVector& bias() const { return bias_; }

 private:
  FeatureMatrix weights_;  // C x d
  FeatureVector bias_;     // C
  std::vector<std::string> names_;
};

// One hidden tanh layer: logits = W2 tanh(W1 z + b1) + b2, analytic gradient.
class MlpHead final : public ClassifierHead {
 public:
  MlpHead(FeatureMatrix w1, FeatureVector b1, FeatureMatrix w2, FeatureVector b2,
          std::vector<std::string> class_names);

  std::size_t num_classes() const override { return w2_.rows; }
  std::size_t feature_dim() const override { return w1_.cols; }
  FeatureVector logits(const FeatureVector& z) const override;
  FeatureVector grad(const FeatureVector& z, std::size_t c) const override;
  const std::vector<std::string>& class_names() const override { return names_; }
  nlohmann::json to_json() const override;

 private:
  FeatureMatrix w1_;  // hidden x d
  FeatureVector b1_;  // hidden
  FeatureMatrix w2_;  // C x hidden
  FeatureVector b2_;  // C
  std::vector<std::string> names_;
};

// Central finite-difference gradient of logit c; fallback for heads without
// an analytic gradient and the oracle used by gradient checks.
FeatureVector finite_diff_grad(const ClassifierHead& head, const FeatureVector& z,
                               std::size_t c, double delta = 1e-5);

std::shared_ptr<ClassifierHead> head_from_json(const nlohmann::json& j);
std::shared_ptr<ClassifierHead> load_head(const std::filesystem::path& path);
void save_head(const std::filesystem::path& path, const ClassifierHead& head);

}  // namespace faithtrace
