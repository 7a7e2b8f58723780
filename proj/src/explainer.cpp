#include "faithtrace/explainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "faithtrace/jsonio.hpp"
#include "faithtrace/rng.hpp"

namespace faithtrace {

const char* concept_source_name(ConceptSource source) {
  switch (source) {
    case ConceptSource::kLlm: return "llm";
    case ConceptSource::kVlm: return "vlm";
    case ConceptSource::kManual: return "manual";
  }
  return "manual";
}

ConceptSource concept_source_from_name(const std::string& name) {
  if (name == "llm") return ConceptSource::kLlm;
  if (name == "vlm") return ConceptSource::kVlm;
  if (name == "manual") return ConceptSource::kManual;
  throw Error(ErrorKind::ParseError, "unknown concept source " + name);
}

namespace {

std::string casefold(const std::string& text) {
  std::string out = text;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

void require_nonempty(const ConceptBank& bank) {
  if (bank.entries.empty()) {
    throw Error(ErrorKind::EmptyBank, "concept bank has no entries");
  }
}

// Stable descending sort; ties keep bank order for reproducibility.
std::vector<Explanation> take_top_k(std::vector<Explanation> scored, std::size_t k) {
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Explanation& a, const Explanation& b) { return a.score > b.score; });
  if (scored.size() > k) scored.resize(k);
  for (std::size_t i = 0; i < scored.size(); ++i) scored[i].rank = i + 1;
  return scored;
}

}  // namespace

std::vector<Explanation> rank_influence(const ConceptBank& bank,
                                        const AffineAligner& aligner,
                                        const ClassifierHead& head, std::size_t c,
                                        const FeatureVector& z, std::size_t k,
                                        RankDiagnostics* diag) {
  require_nonempty(bank);
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  std::vector<Explanation> scored;
  scored.reserve(bank.entries.size());
  for (const ConceptEntry& entry : bank.entries) {
    try {
      DirectionVector dir = direction_closed_form(aligner, z, entry.embedding);
      Explanation e;
      e.text = entry.text;
      e.score = directional_score(head, c, z, dir);
      e.direction = std::move(dir);
      scored.push_back(std::move(e));
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::DegenerateDirection) throw;
      if (diag) diag->degenerate_texts.push_back(entry.text);
    }
  }
  if (scored.empty()) {
    throw Error(ErrorKind::AllDegenerate,
                "every candidate direction is degenerate at this feature point");
  }
  return take_top_k(std::move(scored), k);
}

std::vector<Explanation> rank_text_to_concept(const ConceptBank& bank,
                                              const AffineAligner& aligner,
                                              const FeatureVector& z, std::size_t k) {
  require_nonempty(bank);
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  const FeatureVector aligned = aligner.apply(z);
  if (l2_norm(aligned) < kZeroNormThreshold) {
    throw Error(ErrorKind::ZeroNorm, "aligned feature has near-zero norm");
  }
  std::vector<Explanation> scored;
  scored.reserve(bank.entries.size());
  for (const ConceptEntry& entry : bank.entries) {
    Explanation e;
    e.text = entry.text;
    e.score = cosine(aligned, entry.embedding);
    scored.push_back(std::move(e));
  }
  return take_top_k(std::move(scored), k);
}

std::vector<Explanation> rank_random(const ConceptBank& bank,
                                     const AffineAligner& aligner,
                                     const ClassifierHead& head, std::size_t c,
                                     const FeatureVector& z, std::size_t k,
                                     std::uint64_t seed, RankDiagnostics* diag) {
  require_nonempty(bank);
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  if (k > bank.entries.size()) {
    throw Error(ErrorKind::KTooLarge, "k = " + std::to_string(k) + " exceeds bank size " +
                                          std::to_string(bank.entries.size()));
  }
  // Partial Fisher-Yates: the first k slots are a uniform draw without
  // replacement, and any prefix of the result is itself a uniform draw.
  std::vector<std::size_t> indices(bank.entries.size());
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(indices.size() - i);
    std::swap(indices[i], indices[j]);
  }

  std::vector<Explanation> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const ConceptEntry& entry = bank.entries[indices[i]];
    try {
      DirectionVector dir = direction_closed_form(aligner, z, entry.embedding);
      Explanation e;
      e.text = entry.text;
      e.score = directional_score(head, c, z, dir);
      e.rank = out.size() + 1;
      e.direction = std::move(dir);
      out.push_back(std::move(e));
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::DegenerateDirection) throw;
      if (diag) diag->degenerate_texts.push_back(entry.text);
    }
  }
  return out;
}

nlohmann::json bank_to_json(const ConceptBank& bank) {
  nlohmann::json j;
  j["class"] = bank.class_label;
  if (bank.sample_id) j["sample_id"] = *bank.sample_id;
  nlohmann::json concepts = nlohmann::json::array();
  for (const ConceptEntry& entry : bank.entries) {
    nlohmann::json c;
    c["text"] = entry.text;
    c["source"] = concept_source_name(entry.source);
    c["embedding"] = vector_to_json(entry.embedding);
    concepts.push_back(std::move(c));
  }
  j["concepts"] = std::move(concepts);
  return j;
}

ConceptBank bank_from_json(const nlohmann::json& j) {
  if (!j.contains("class") || !j.contains("concepts")) {
    throw Error(ErrorKind::ParseError, "bank JSON needs keys class and concepts");
  }
  ConceptBank bank;
  bank.class_label = j.at("class").get<std::string>();
  if (j.contains("sample_id")) bank.sample_id = j.at("sample_id").get<std::string>();

  std::unordered_set<std::string> seen;
  std::size_t dim = 0;
  for (const auto& c : j.at("concepts")) {
    if (!c.contains("text") || !c.contains("embedding")) {
      throw Error(ErrorKind::ParseError, "each concept needs text and embedding keys");
    }
    ConceptEntry entry;
    entry.text = c.at("text").get<std::string>();
    entry.source = concept_source_from_name(c.value("source", "manual"));
    entry.embedding = vector_from_json(c.at("embedding"), "concept embedding");
    if (entry.text.empty()) {
      throw Error(ErrorKind::InvalidArgument, "concept text must be nonempty");
    }
    if (!seen.insert(casefold(entry.text)).second) {
      throw Error(ErrorKind::InvalidArgument,
                  "duplicate concept text after case folding: " + entry.text);
    }
    if (dim == 0) dim = entry.embedding.size();
    if (entry.embedding.size() != dim) {
      throw Error(ErrorKind::DimMismatch, "concept embeddings have mixed dimensions");
    }
    const double norm = l2_norm(entry.embedding);
    if (std::abs(norm - 1.0) > 1e-6) {
      throw Error(ErrorKind::InvalidArgument,
                  "concept embedding for \"" + entry.text + "\" is not unit-normalized");
    }
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

void save_bank(const std::filesystem::path& path, const ConceptBank& bank) {
  write_json_file(path, bank_to_json(bank));
}

ConceptBank load_bank(const std::filesystem::path& path) {
  return bank_from_json(read_json_file(path));
}

std::string explanation_to_jsonl(const Explanation& e, const std::string& method) {
  nlohmann::json j;
  j["rank"] = e.rank;
  j["text"] = e.text;
  j["score"] = e.score;
  j["method"] = method;
  if (e.score <= 0.0) j["nonpositive"] = true;
  return dump_json(j);
}

}  // namespace faithtrace
