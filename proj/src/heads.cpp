#include "faithtrace/heads.hpp"

#include <cmath>

#include "faithtrace/jsonio.hpp"

namespace faithtrace {

void ClassifierHead::check_input(const FeatureVector& z) const {
  if (z.size() != feature_dim()) {
    throw Error(ErrorKind::DimMismatch, "feature length " + std::to_string(z.size()) +
                                            " vs head dim " +
                                            std::to_string(feature_dim()));
  }
}

void ClassifierHead::check_input(const FeatureVector& z, std::size_t c) const {
  check_input(z);
  if (c >= num_classes()) {
    throw Error(ErrorKind::InvalidClass, "class " + std::to_string(c) + " out of " +
                                             std::to_string(num_classes()));
  }
}

namespace {

std::vector<std::string> default_names(std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

void validate_head_shape(std::size_t num_classes, std::size_t name_count) {
  if (num_classes < 2) {
    throw Error(ErrorKind::InvalidArgument, "a classifier head needs at least 2 classes");
  }
  if (name_count != num_classes) {
    throw Error(ErrorKind::CountMismatch,
                std::to_string(name_count) + " class names for " +
                    std::to_string(num_classes) + " classes");
  }
}

}  // namespace

LinearHead::LinearHead(FeatureMatrix weights, FeatureVector bias,
                       std::vector<std::string> class_names)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  names_ = class_names.empty() ? default_names(weights_.rows) : std::move(class_names);
  if (bias_.size() != weights_.rows) {
    throw Error(ErrorKind::DimMismatch, "linear head bias length vs class count");
  }
  validate_head_shape(weights_.rows, names_.size());
  require_finite(weights_, "linear head W");
  require_finite(bias_, "linear head bias");
}

FeatureVector LinearHead::logits(const FeatureVector& z) const {
  check_input(z);
  FeatureVector out = matvec(weights_, z);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += bias_[c];
  return out;
}

FeatureVector LinearHead::grad(const FeatureVector& z, std::size_t c) const {
  check_input(z, c);
  return weights_.row(c);
}

nlohmann::json LinearHead::to_json() const {
  nlohmann::json j;
  j["type"] = "linear";
  nlohmann::json w = nlohmann::json::array();
  for (double x : weights_.values) w.push_back(x);
  j["W"] = std::move(w);
  j["bias"] = vector_to_json(bias_);
  j["classes"] = names_;
  return j;
}

MlpHead::MlpHead(FeatureMatrix w1, FeatureVector b1, FeatureMatrix w2, FeatureVector b2,
                 std::vector<std::string> class_names)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
  names_ = class_names.empty() ? default_names(w2_.rows) : std::move(class_names);
  if (b1_.size() != w1_.rows || b2_.size() != w2_.rows || w2_.cols != w1_.rows) {
    throw Error(ErrorKind::DimMismatch, "mlp head layer shapes are inconsistent");
  }
  validate_head_shape(w2_.rows, names_.size());
  require_finite(w1_, "mlp head W1");
  require_finite(b1_, "mlp head b1");
  require_finite(w2_, "mlp head W2");
  require_finite(b2_, "mlp head b2");
}

FeatureVector MlpHead::logits(const FeatureVector& z) const {
  check_input(z);
  FeatureVector hidden = matvec(w1_, z);
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::tanh(hidden[i] + b1_[i]);
  FeatureVector out = matvec(w2_, hidden);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += b2_[c];
  return out;
}

FeatureVector MlpHead::grad(const FeatureVector& z, std::size_t c) const {
  check_input(z, c);
  // d logit_c / dz = W1^T (w2_row_c * (1 - tanh^2(W1 z + b1)))
  FeatureVector pre = matvec(w1_, z);
  FeatureVector weighted(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const double t = std::tanh(pre[i] + b1_[i]);
    weighted[i] = w2_.at(c, i) * (1.0 - t * t);
  }
  return matvec_transposed(w1_, weighted);
}

nlohmann::json MlpHead::to_json() const {
  nlohmann::json j;
  j["type"] = "mlp";
  nlohmann::json w1 = nlohmann::json::array();
  for (double x : w1_.values) w1.push_back(x);
  nlohmann::json w2 = nlohmann::json::array();
  for (double x : w2_.values) w2.push_back(x);
  j["W1"] = std::move(w1);
  j["b1"] = vector_to_json(b1_);
  j["W2"] = std::move(w2);
  j["b2"] = vector_to_json(b2_);
  j["activation"] = "tanh";
  j["classes"] = names_;
  return j;
}

FeatureVector finite_diff_grad(const ClassifierHead& head, const FeatureVector& z,
                               std::size_t c, double delta) {
  if (delta <= 0.0) throw Error(ErrorKind::InvalidArgument, "delta must be positive");
  FeatureVector out(z.size());
  FeatureVector probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    probe[i] = z[i] + delta;
    const double hi = head.logits(probe)[c];
    probe[i] = z[i] - delta;
    const double lo = head.logits(probe)[c];
    probe[i] = z[i];
    out[i] = (hi - lo) / (2.0 * delta);
  }
  return out;
}

namespace {

const nlohmann::json& require_key(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorKind::ParseError, std::string("head JSON missing key ") + key);
  }
  return j.at(key);
}

std::vector<std::string> names_from_json(const nlohmann::json& j) {
  const nlohmann::json& names = require_key(j, "classes");
  if (!names.is_array()) {
    throw Error(ErrorKind::ParseError, "head classes must be an array of strings");
  }
  std::vector<std::string> out;
  for (const auto& name : names) {
    if (!name.is_string()) {
      throw Error(ErrorKind::ParseError, "head classes must be an array of strings");
    }
    out.push_back(name.get<std::string>());
  }
  return out;
}

FeatureMatrix matrix_from_flat(const nlohmann::json& j, const char* key,
                               std::size_t rows) {
  FeatureVector flat = vector_from_json(require_key(j, key), std::string("head ") + key);
  if (rows == 0 || flat.size() % rows != 0) {
    throw Error(ErrorKind::DimMismatch,
                std::string("head ") + key + " length " + std::to_string(flat.size()) +
                    " not divisible by " + std::to_string(rows) + " rows");
  }
  FeatureMatrix m;
  m.rows = rows;
  m.cols = flat.size() / rows;
  m.values = std::move(flat);
  return m;
}

}  // namespace

std::shared_ptr<ClassifierHead> head_from_json(const nlohmann::json& j) {
  const std::string type = require_key(j, "type").get<std::string>();
  if (type == "linear") {
    auto names = names_from_json(j);
    FeatureVector bias = vector_from_json(require_key(j, "bias"), "head bias");
    FeatureMatrix w = matrix_from_flat(j, "W", bias.size());
    return std::make_shared<LinearHead>(std::move(w), std::move(bias), std::move(names));
  }
  if (type == "mlp") {
    if (j.value("activation", "tanh") != std::string("tanh")) {
      throw Error(ErrorKind::ParseError,
                  "unsupported mlp activation " + j.at("activation").get<std::string>());
    }
    auto names = names_from_json(j);
    FeatureVector b1 = vector_from_json(require_key(j, "b1"), "head b1");
    FeatureVector b2 = vector_from_json(require_key(j, "b2"), "head b2");
    FeatureMatrix w1 = matrix_from_flat(j, "W1", b1.size());
    FeatureMatrix w2 = matrix_from_flat(j, "W2", b2.size());
    return std::make_shared<MlpHead>(std::move(w1), std::move(b1), std::move(w2),
                                     std::move(b2), std::move(names));
  }
  throw Error(ErrorKind::ParseError, "unknown head type " + type);
}

std::shared_ptr<ClassifierHead> load_head(const std::filesystem::path& path) {
  return head_from_json(read_json_file(path));
}

void save_head(const std::filesystem::path& path, const ClassifierHead& head) {
  write_json_file(path, head.to_json());
}

}  // namespace faithtrace
