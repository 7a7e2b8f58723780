#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithtrace/influence.hpp"

namespace faithtrace {

// Relative step sizes for the insertion/deletion sweep; absolute steps are
// alpha_k = rho_k * ||z||_2 so interventions stay near the data manifold.
struct CurveConfig {
  std::vector<double> rhos = {0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  bool use_margin_confidence = true;
};

void validate(const CurveConfig& cfg);

struct InfluenceCurve {
  std::vector<double> rhos;
  std::vector<double> insertion;  // phi(z + alpha_k u) - phi(z)
  std::vector<double> deletion;   // phi(z) - phi(z - alpha_k u)
  double insertion_sum = 0.0;
  double deletion_sum = 0.0;
};

// m_c = g_c(z) - max_{j != c} g_j(z). Throws InvalidClass.
double margin(const ClassifierHead& head, const FeatureVector& z, std::size_t c);

// q_c = sigmoid(m_c) in (0, 1), strictly monotone in the margin.
double margin_confidence(const ClassifierHead& head, const FeatureVector& z,
                         std::size_t c);

// Insertion/deletion deltas over the configured sweep. phi is the margin
// confidence q_c by default, or the raw logit g_c when
// use_margin_confidence is false.
InfluenceCurve influence_curve(const ClassifierHead& head, std::size_t c,
                               const FeatureVector& z, const DirectionVector& dir,
                               const CurveConfig& cfg);

// Pair-pooled aggregation over (sample, retrieved-text) items: one global
// mean and strict negative rate over all item scores; per-step curve means
// over all items, then sums over steps.
struct AggregateStats {
  std::size_t item_count = 0;
  double mean = 0.0;
  double negative_rate = 0.0;
  std::vector<double> rhos;
  std::vector<double> insertion_avg;
  std::vector<double> deletion_avg;
  double insertion_sum = 0.0;
  double deletion_sum = 0.0;
  bool has_curves = false;
};

// Throws EmptyInput when no scores are given; curves must be empty or match
// the score count one-to-one.
AggregateStats aggregate(const std::vector<double>& item_scores,
                         const std::vector<InfluenceCurve>& item_curves);

struct SampleRecord {
  std::string sample_id;
  std::size_t class_index = 0;
  std::vector<std::string> texts;
  std::vector<double> scores;  // directional scores, one per retrieved text
  std::optional<InfluenceCurve> curve;  // per-step mean over this sample's items
};

struct EvaluationReport {
  std::string method;
  std::size_t top_k = 0;
  AggregateStats stats;
  std::vector<SampleRecord> per_sample;
};

nlohmann::json report_to_json(const EvaluationReport& report);

// Fig-2-style CSV: header method,rho,insertion,deletion then one row per
// rho with the pair-pooled per-step means.
std::string curves_to_csv(const std::string& method, const AggregateStats& stats);

}  // namespace faithtrace
