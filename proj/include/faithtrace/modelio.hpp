#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "faithtrace/aligner.hpp"
#include "faithtrace/explainer.hpp"
#include "faithtrace/heads.hpp"

namespace faithtrace {

// FTM1 container: magic "FTM1", u32-LE rows, u32-LE cols, then rows*cols
// IEEE f32-LE values row-major. 32-bit on disk, 64-bit in memory.
// Readers reject non-finite payloads with the byte offset of the bad entry.
FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& matrix);

enum class HeadKind { kLinear, kMlp };

// Desk-scale stand-in for a classifier + joint embedding space + dataset.
struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t feature_dim = 8;   // d
  std::size_t embed_dim = 12;    // m
  std::size_t num_classes = 3;   // C
  std::size_t num_samples = 10;
  std::size_t bank_size = 10;
  std::size_t train_count = 0;   // 0 derives 4 * (d + 1)
  double noise_sigma = 0.0;
  HeadKind head_kind = HeadKind::kLinear;
};

struct SyntheticSample {
  std::string sample_id;
  FeatureVector features;
  std::size_t class_index = 0;  // predicted class under the world's head
  ConceptBank bank;             // per-sample bank with one planted positive
  std::string planted_text;
};

struct SyntheticWorld {
  SynthSpec spec;
  AffineAligner true_aligner;  // ground-truth A, c behind the training data
  std::shared_ptr<ClassifierHead> head;
  AlignmentDataset train;      // targets = A z + c (+ gaussian noise)
  std::vector<SyntheticSample> samples;
};

// Deterministic for a given spec; every sample's bank contains one concept
// constructed to have a strictly positive directional score for the
// sample's predicted class, with a margin over all other candidates.
SyntheticWorld synth_world(const SynthSpec& spec);

// Layout written under dir:
//   head.json, aligner_true.json, train_features.ftm, train_targets.ftm,
//   samples/<sample_id>/{features.ftm, bank.json, meta.json}
void write_world(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace faithtrace
