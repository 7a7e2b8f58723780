#include "faithtrace/metrics.hpp"

#include <cmath>

#include "faithtrace/jsonio.hpp"

namespace faithtrace {

void validate(const CurveConfig& cfg) {
  if (cfg.rhos.empty()) {
    throw Error(ErrorKind::InvalidArgument, "curve config needs at least one rho");
  }
  double prev = 0.0;
  for (double rho : cfg.rhos) {
    if (!(rho > prev)) {
      throw Error(ErrorKind::InvalidArgument,
                  "rhos must be strictly increasing and positive");
    }
    prev = rho;
  }
}

double margin(const ClassifierHead& head, const FeatureVector& z, std::size_t c) {
  const FeatureVector scores = head.logits(z);
  if (c >= scores.size()) {
    throw Error(ErrorKind::InvalidClass, "class " + std::to_string(c) + " out of " +
                                             std::to_string(scores.size()));
  }
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != c && scores[j] > best_other) best_other = scores[j];
  }
  return scores[c] - best_other;
}

namespace {

// Overflow-safe logistic function.
double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double margin_confidence(const ClassifierHead& head, const FeatureVector& z,
                         std::size_t c) {
  return sigmoid(margin(head, z, c));
}

InfluenceCurve influence_curve(const ClassifierHead& head, std::size_t c,
                               const FeatureVector& z, const DirectionVector& dir,
                               const CurveConfig& cfg) {
  validate(cfg);
  if (dir.unit.size() != z.size()) {
    throw Error(ErrorKind::DimMismatch, "direction length vs feature length");
  }
  if (l2_norm(dir.raw) < kZeroNormThreshold) {
    throw Error(ErrorKind::DegenerateDirection, "influence curve needs a nondegenerate direction");
  }
  const auto phi = [&](const FeatureVector& point) {
    return cfg.use_margin_confidence ? margin_confidence(head, point, c)
                                     : head.logits(point)[c];
  };
  const double base = phi(z);
  const double feature_norm = l2_norm(z);

  InfluenceCurve curve;
  curve.rhos = cfg.rhos;
  curve.insertion.reserve(cfg.rhos.size());
  curve.deletion.reserve(cfg.rhos.size());
  for (double rho : cfg.rhos) {
    const double alpha = rho * feature_norm;
    curve.insertion.push_back(phi(axpy(z, alpha, dir.unit)) - base);
    curve.deletion.push_back(base - phi(axpy(z, -alpha, dir.unit)));
  }
  for (double v : curve.insertion) curve.insertion_sum += v;
  for (double v : curve.deletion) curve.deletion_sum += v;
  return curve;
}

AggregateStats aggregate(const std::vector<double>& item_scores,
                         const std::vector<InfluenceCurve>& item_curves) {
  if (item_scores.empty()) {
    throw Error(ErrorKind::EmptyInput, "no scored items to aggregate");
  }
  if (!item_curves.empty() && item_curves.size() != item_scores.size()) {
    throw Error(ErrorKind::CountMismatch,
                std::to_string(item_curves.size()) + " curves for " +
                    std::to_string(item_scores.size()) + " scores");
  }

  AggregateStats stats;
  stats.item_count = item_scores.size();
  double total = 0.0;
  std::size_t negatives = 0;
  for (double s : item_scores) {
    total += s;
    if (s < 0.0) ++negatives;  // strict: zeros count as non-negative
  }
  stats.mean = total / static_cast<double>(item_scores.size());
  stats.negative_rate = static_cast<double>(negatives) / static_cast<double>(item_scores.size());

  if (!item_curves.empty()) {
    const std::size_t steps = item_curves.front().rhos.size();
    for (const InfluenceCurve& curve : item_curves) {
      if (curve.rhos != item_curves.front().rhos) {
        throw Error(ErrorKind::CountMismatch, "curves use different rho sweeps");
      }
    }
    stats.has_curves = true;
    stats.rhos = item_curves.front().rhos;
    stats.insertion_avg.assign(steps, 0.0);
    stats.deletion_avg.assign(steps, 0.0);
    for (const InfluenceCurve& curve : item_curves) {
      for (std::size_t k = 0; k < steps; ++k) {
        stats.insertion_avg[k] += curve.insertion[k];
        stats.deletion_avg[k] += curve.deletion[k];
      }
    }
    const double inv = 1.0 / static_cast<double>(item_curves.size());
    for (std::size_t k = 0; k < steps; ++k) {
      stats.insertion_avg[k] *= inv;
      stats.deletion_avg[k] *= inv;
      stats.insertion_sum += stats.insertion_avg[k];
      stats.deletion_sum += stats.deletion_avg[k];
    }
  }
  return stats;
}

namespace {

nlohmann::json curve_to_json(const InfluenceCurve& curve) {
  nlohmann::json j;
  j["rhos"] = vector_to_json(curve.rhos);
  j["insertion"] = vector_to_json(curve.insertion);
  j["deletion"] = vector_to_json(curve.deletion);
  j["insertion_sum"] = curve.insertion_sum;
  j["deletion_sum"] = curve.deletion_sum;
  return j;
}

}  // namespace

nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["top_k"] = report.top_k;
  j["item_count"] = report.stats.item_count;
  j["mean_directional_score"] = report.stats.mean;
  j["negative_rate"] = report.stats.negative_rate;
  if (report.stats.has_curves) {
    nlohmann::json curve;
    curve["rhos"] = vector_to_json(report.stats.rhos);
    curve["insertion_avg"] = vector_to_json(report.stats.insertion_avg);
    curve["deletion_avg"] = vector_to_json(report.stats.deletion_avg);
    curve["insertion_sum"] = report.stats.insertion_sum;
    curve["deletion_sum"] = report.stats.deletion_sum;
    j["curve"] = std::move(curve);
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const SampleRecord& record : report.per_sample) {
    nlohmann::json s;
    s["sample_id"] = record.sample_id;
    s["class_index"] = record.class_index;
    s["texts"] = record.texts;
    s["scores"] = vector_to_json(record.scores);
    if (record.curve) s["curve"] = curve_to_json(*record.curve);
    samples.push_back(std::move(s));
  }
  j["per_sample"] = std::move(samples);
  return j;
}

std::string curves_to_csv(const std::string& method, const AggregateStats& stats) {
  std::string csv = "method,rho,insertion,deletion\n";
  for (std::size_t k = 0; k < stats.rhos.size(); ++k) {
    csv += method;
    csv += ',';
    csv += format_double(stats.rhos[k]);
    csv += ',';
    csv += format_double(stats.insertion_avg[k]);
    csv += ',';
    csv += format_double(stats.deletion_avg[k]);
    csv += '\n';
  }
  return csv;
}

}  // namespace faithtrace
