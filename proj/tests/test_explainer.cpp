#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "faithtrace/explainer.hpp"
#include "faithtrace/jsonio.hpp"
#include "support/oracles.hpp"

using namespace faithtrace;

namespace {

AffineAligner identity_aligner(std::size_t n) {
  AffineAligner a;
  a.W = FeatureMatrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a.W.at(i, i) = 1.0;
  a.b = FeatureVector(n, 0.0);
  return a;
}

ConceptEntry entry(std::string text, FeatureVector embedding,
                   ConceptSource source = ConceptSource::kManual) {
  ConceptEntry e;
  e.text = std::move(text);
  e.embedding = std::move(embedding);
  e.source = source;
  return e;
}

// Bank over an identity aligner at z = e1 whose candidate scores under
// w_c = e2 are exactly the requested cosines: each candidate embeds as
// (e1 + (0, c, s)) / sqrt(2), so its induced unit direction is (0, c, s).
ConceptBank bank_with_scores(const std::vector<double>& scores) {
  ConceptBank bank;
  bank.class_label = "fixture";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double c = scores[i];
    const double s = std::sqrt(1.0 - c * c);
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    bank.entries.push_back(entry("candidate " + std::to_string(i),
                                 {inv_rt2, c * inv_rt2, s * inv_rt2}));
  }
  return bank;
}

LinearHead fixture_head() {
  FeatureMatrix w(2, 3, 0.0);
  w.at(0, 1) = 1.0;  // w_0 = e2: score equals the planted cosine
  w.at(1, 2) = 1.0;
  return LinearHead(w, {0.0, 0.0}, {});
}

struct RandomWorld {
  AffineAligner aligner;
  std::shared_ptr<LinearHead> head;
  FeatureVector z;
  ConceptBank bank;
};

RandomWorld random_world(std::uint64_t seed, std::size_t n_candidates) {
  Rng rng(seed);
  RandomWorld w;
  const std::size_t d = 5, m = 7;
  w.aligner = oracles::random_aligner(rng, m, d);
  w.head = std::make_shared<LinearHead>(oracles::random_matrix(rng, 3, d),
                                        oracles::random_vector(rng, 3),
                                        std::vector<std::string>{});
  w.z = oracles::random_vector(rng, d);
  w.bank.class_label = "random";
  for (std::size_t i = 0; i < n_candidates; ++i) {
    w.bank.entries.push_back(
        entry("concept " + std::to_string(i), oracles::random_unit(rng, m)));
  }
  return w;
}

// Fully independent rescoring: finite-difference direction, then
// finite-difference head gradient.
double fd_directional_score(const AffineAligner& aligner, const ClassifierHead& head,
                            std::size_t c, const FeatureVector& z,
                            const FeatureVector& embedding) {
  const FeatureVector raw = direction_finite_diff(aligner, z, embedding, 1e-6);
  const FeatureVector unit = normalize(raw);
  const FeatureVector grad = finite_diff_grad(head, z, c, 1e-6);
  double total = 0.0;
  for (std::size_t i = 0; i < unit.size(); ++i) total += grad[i] * unit[i];
  return total;
}

}  // namespace

TEST_CASE("influence ranking returns the argmax candidate first") {
  const ConceptBank bank = bank_with_scores({0.5, -0.2, 0.9});
  const LinearHead head = fixture_head();
  const AffineAligner aligner = identity_aligner(3);
  const FeatureVector z = {1.0, 0.0, 0.0};

  const auto top = rank_influence(bank, aligner, head, 0, z, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].text == "candidate 2");
  CHECK(top[0].score == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(top[0].rank == 1);

  const auto all = rank_influence(bank, aligner, head, 0, z, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[0].text == "candidate 2");
  CHECK(all[1].text == "candidate 0");
  CHECK(all[2].text == "candidate 1");
  CHECK(all[2].score == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(all[2].rank == 3);
}

TEST_CASE("identical embeddings tie and keep bank order") {
  ConceptBank bank = bank_with_scores({0.4, 0.4});
  bank.entries[1].embedding = bank.entries[0].embedding;
  bank.entries[0].text = "first";
  bank.entries[1].text = "second";
  const auto ranked = rank_influence(bank, identity_aligner(3), fixture_head(), 0,
                                     {1.0, 0.0, 0.0}, 2);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].score == ranked[1].score);
  CHECK(ranked[0].text == "first");
  CHECK(ranked[1].text == "second");
}

TEST_CASE("influence ranking order matches an independent rescoring") {
  const RandomWorld w = random_world(41, 10);
  const auto ranked = rank_influence(w.bank, w.aligner, *w.head, 1, w.z, 10);
  REQUIRE(ranked.size() == 10);

  std::vector<std::pair<double, std::string>> oracle;
  for (const ConceptEntry& e : w.bank.entries) {
    oracle.emplace_back(-fd_directional_score(w.aligner, *w.head, 1, w.z, e.embedding),
                        e.text);
  }
  std::stable_sort(oracle.begin(), oracle.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].text == oracle[i].second);
    CHECK(std::abs(ranked[i].score + oracle[i].first) <= 1e-4);
  }
}

TEST_CASE("influence ranking error cases") {
  ConceptBank empty;
  empty.class_label = "x";
  try {
    rank_influence(empty, identity_aligner(3), fixture_head(), 0, {1.0, 0.0, 0.0}, 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyBank);
  }

  // Both candidates parallel to the aligned feature: every direction vanishes.
  ConceptBank degenerate;
  degenerate.class_label = "x";
  degenerate.entries.push_back(entry("plus", {1.0, 0.0, 0.0}));
  degenerate.entries.push_back(entry("minus", {-1.0, 0.0, 0.0}));
  RankDiagnostics diag;
  try {
    rank_influence(degenerate, identity_aligner(3), fixture_head(), 0, {1.0, 0.0, 0.0}, 1,
                   &diag);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AllDegenerate);
  }
  CHECK(diag.degenerate_texts.size() == 2);
}

TEST_CASE("text-to-concept ranks by joint-space cosine") {
  ConceptBank bank;
  bank.class_label = "x";
  bank.entries.push_back(entry("aligned", {1.0, 0.0}));
  bank.entries.push_back(entry("orthogonal", {0.0, 1.0}));
  const auto ranked = rank_text_to_concept(bank, identity_aligner(2), {1.0, 0.0}, 2);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].text == "aligned");
  CHECK(ranked[0].score == 1.0);
  CHECK(ranked[1].score == 0.0);
  CHECK_FALSE(ranked[0].direction.has_value());
}

TEST_CASE("text-to-concept all-orthogonal candidates keep bank order") {
  ConceptBank bank;
  bank.class_label = "x";
  bank.entries.push_back(entry("a", {0.0, 1.0, 0.0}));
  bank.entries.push_back(entry("b", {0.0, 0.0, 1.0}));
  bank.entries.push_back(entry("c", {0.0, -1.0, 0.0}));
  const auto ranked = rank_text_to_concept(bank, identity_aligner(3), {1.0, 0.0, 0.0}, 3);
  CHECK(ranked[0].text == "a");
  CHECK(ranked[1].text == "b");
  CHECK(ranked[2].text == "c");
  for (const auto& e : ranked) CHECK(e.score == 0.0);
}

TEST_CASE("text-to-concept order matches independent cosine recomputation") {
  const RandomWorld w = random_world(42, 12);
  const auto ranked = rank_text_to_concept(w.bank, w.aligner, w.z, 12);
  const FeatureVector aligned = w.aligner.apply(w.z);
  std::vector<std::pair<double, std::string>> oracle;
  for (const ConceptEntry& e : w.bank.entries) {
    oracle.emplace_back(-oracles::naive_cosine(aligned, e.embedding), e.text);
  }
  std::stable_sort(oracle.begin(), oracle.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].text == oracle[i].second);
  }
}

TEST_CASE("random baseline is deterministic per seed") {
  const RandomWorld w = random_world(43, 8);
  const auto first = rank_random(w.bank, w.aligner, *w.head, 0, w.z, 4, 7);
  const auto second = rank_random(w.bank, w.aligner, *w.head, 0, w.z, 4, 7);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].text == second[i].text);
    CHECK(first[i].score == second[i].score);
  }
  const auto other = rank_random(w.bank, w.aligner, *w.head, 0, w.z, 4, 8);
  bool same = other.size() == first.size();
  if (same) {
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (other[i].text != first[i].text) same = false;
    }
  }
  CHECK_FALSE(same);
}

TEST_CASE("random baseline with k equal to the bank size is a permutation") {
  const RandomWorld w = random_world(44, 6);
  const auto drawn = rank_random(w.bank, w.aligner, *w.head, 0, w.z, 6, 3);
  REQUIRE(drawn.size() == 6);
  std::set<std::string> texts;
  for (const auto& e : drawn) texts.insert(e.text);
  CHECK(texts.size() == 6);
}

TEST_CASE("random baseline rejects oversized k") {
  const RandomWorld w = random_world(45, 4);
  try {
    rank_random(w.bank, w.aligner, *w.head, 0, w.z, 5, 0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::KTooLarge);
  }
}

TEST_CASE("random baseline draws uniformly") {
  const RandomWorld w = random_world(46, 4);
  std::map<std::string, int> counts;
  const int draws = 10000;
  for (int seed = 0; seed < draws; ++seed) {
    const auto picked = rank_random(w.bank, w.aligner, *w.head, 0, w.z, 1,
                                    static_cast<std::uint64_t>(seed));
    REQUIRE(picked.size() == 1);
    counts[picked[0].text] += 1;
  }
  // Binomial(10000, 1/4): sigma = sqrt(n p (1-p)) ~ 43.3; allow 3 sigma.
  const double expected = draws / 4.0;
  const double three_sigma = 3.0 * std::sqrt(draws * 0.25 * 0.75);
  CHECK(counts.size() == 4);
  for (const auto& [text, count] : counts) {
    CHECK(std::abs(count - expected) <= three_sigma);
  }
}

TEST_CASE("influence ranking dominates both baselines") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const RandomWorld w = random_world(seed, 9);
    const auto best = rank_influence(w.bank, w.aligner, *w.head, 0, w.z, 1);
    REQUIRE(best.size() == 1);

    const auto t2c = rank_text_to_concept(w.bank, w.aligner, w.z, 3);
    std::map<std::string, const ConceptEntry*> by_text;
    for (const ConceptEntry& e : w.bank.entries) by_text[e.text] = &e;
    for (const auto& e : t2c) {
      const DirectionVector dir =
          direction_closed_form(w.aligner, w.z, by_text.at(e.text)->embedding);
      CHECK(best[0].score >= directional_score(*w.head, 0, w.z, dir));
    }
    const auto random_picks = rank_random(w.bank, w.aligner, *w.head, 0, w.z, 3, seed);
    for (const auto& e : random_picks) {
      CHECK(best[0].score >= e.score);
    }
  }
}

TEST_CASE("a bank with a positive candidate yields a positive top score") {
  for (std::uint64_t seed = 60; seed < 70; ++seed) {
    const RandomWorld w = random_world(seed, 9);
    bool has_positive = false;
    for (const ConceptEntry& e : w.bank.entries) {
      try {
        const DirectionVector dir = direction_closed_form(w.aligner, w.z, e.embedding);
        if (directional_score(*w.head, 0, w.z, dir) > 0.0) has_positive = true;
      } catch (const Error&) {
      }
    }
    if (!has_positive) continue;
    const auto best = rank_influence(w.bank, w.aligner, *w.head, 0, w.z, 1);
    CHECK(best[0].score > 0.0);
  }
}

TEST_CASE("permuting the bank leaves distinct-score top-k invariant") {
  const RandomWorld w = random_world(71, 8);
  const auto baseline = rank_influence(w.bank, w.aligner, *w.head, 0, w.z, 4);

  ConceptBank shuffled = w.bank;
  std::rotate(shuffled.entries.begin(), shuffled.entries.begin() + 3,
              shuffled.entries.end());
  const auto permuted = rank_influence(shuffled, w.aligner, *w.head, 0, w.z, 4);

  std::set<std::pair<std::string, double>> lhs, rhs;
  for (const auto& e : baseline) lhs.insert({e.text, e.score});
  for (const auto& e : permuted) rhs.insert({e.text, e.score});
  CHECK(lhs == rhs);
}

TEST_CASE("bank JSON validates and round-trips") {
  const RandomWorld w = random_world(72, 3);
  const nlohmann::json j = nlohmann::json::parse(dump_json(bank_to_json(w.bank)));
  const ConceptBank back = bank_from_json(j);
  CHECK(back.class_label == w.bank.class_label);
  REQUIRE(back.entries.size() == 3);
  CHECK(back.entries[0].text == w.bank.entries[0].text);
  CHECK(back.entries[0].embedding == w.bank.entries[0].embedding);

  nlohmann::json dup = j;
  dup["concepts"].push_back(dup["concepts"][0]);
  dup["concepts"].back()["text"] = "Concept 0";  // case-fold duplicate of "concept 0"
  CHECK_THROWS_AS(bank_from_json(dup), Error);

  nlohmann::json unnormalized = j;
  unnormalized["concepts"][0]["embedding"][0] = 5.0;
  CHECK_THROWS_AS(bank_from_json(unnormalized), Error);
}

TEST_CASE("explanations serialize as JSON lines with a nonpositive flag") {
  Explanation e;
  e.text = "orange plumage";
  e.score = 0.25;
  e.rank = 1;
  CHECK(explanation_to_jsonl(e, "faithtrace") ==
        "{\"method\":\"faithtrace\",\"rank\":1,\"score\":0.25,"
        "\"text\":\"orange plumage\"}");
  e.score = -0.5;
  e.rank = 2;
  const nlohmann::json parsed = nlohmann::json::parse(explanation_to_jsonl(e, "t2c"));
  CHECK(parsed.at("nonpositive") == true);
  CHECK(parsed.at("score") == -0.5);
}
