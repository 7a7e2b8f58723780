#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithtrace/influence.hpp"

namespace faithtrace {

enum class ConceptSource { kLlm, kVlm, kManual };

const char* concept_source_name(ConceptSource source);
ConceptSource concept_source_from_name(const std::string& name);

// One candidate concept phrase with its unit text embedding.
struct ConceptEntry {
  std::string text;
  FeatureVector embedding;  // unit-normalized, joint-space dim
  ConceptSource source = ConceptSource::kManual;
};

struct ConceptBank {
  std::vector<ConceptEntry> entries;
  std::string class_label;
  std::optional<std::string> sample_id;
};

struct Explanation {
  std::string text;
  double score = 0.0;  // directional score, or cosine for the t2c baseline
  std::size_t rank = 0;
  std::optional<DirectionVector> direction;
};

// Per-call bookkeeping for candidates that had to be skipped.
struct RankDiagnostics {
  std::vector<std::string> degenerate_texts;
};

// Score every candidate by the directional derivative of logit c along its
// text-induced direction, sort descending with ties kept in bank order, and
// return the first min(k, valid) entries. Degenerate-direction candidates
// are skipped, not scored as zero. Scores may be negative when no positive
// candidate exists; they are reported as-is.
// Throws EmptyBank and AllDegenerate.
std::vector<Explanation> rank_influence(const ConceptBank& bank,
                                        const AffineAligner& aligner,
                                        const ClassifierHead& head, std::size_t c,
                                        const FeatureVector& z, std::size_t k,
                                        RankDiagnostics* diag = nullptr);

// Baseline: score candidates by joint-space cosine with the aligned feature.
std::vector<Explanation> rank_text_to_concept(const ConceptBank& bank,
                                              const AffineAligner& aligner,
                                              const FeatureVector& z, std::size_t k);

// Baseline: k distinct candidates drawn uniformly without replacement from a
// seeded deterministic generator. Rank is draw order; the score field
// carries each draw's directional score so all methods share one metric.
// Degenerate draws are dropped from the result (recorded in diag).
// Throws KTooLarge when k exceeds the bank size.
std::vector<Explanation> rank_random(const ConceptBank& bank,
                                     const AffineAligner& aligner,
                                     const ClassifierHead& head, std::size_t c,
                                     const FeatureVector& z, std::size_t k,
                                     std::uint64_t seed,
                                     RankDiagnostics* diag = nullptr);

nlohmann::json bank_to_json(const ConceptBank& bank);
ConceptBank bank_from_json(const nlohmann::json& j);
void save_bank(const std::filesystem::path& path, const ConceptBank& bank);
ConceptBank load_bank(const std::filesystem::path& path);

// One JSON line: {"rank":...,"text":...,"score":...,"method":...}; entries
// with score <= 0 additionally carry "nonpositive":true.
std::string explanation_to_jsonl(const Explanation& e, const std::string& method);

}  // namespace faithtrace
