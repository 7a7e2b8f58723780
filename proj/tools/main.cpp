#include <atomic>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "faithtrace/conceptbank_gen.hpp"
#include "faithtrace/influence.hpp"
#include "faithtrace/jsonio.hpp"
#include "faithtrace/metrics.hpp"
#include "faithtrace/modelio.hpp"
#include "faithtrace/rng.hpp"
#include "faithtrace/version.hpp"

namespace fs = std::filesystem;
using namespace faithtrace;

namespace {

// SOURCE_DATE_EPOCH pins manifest timestamps for reproducible runs.
std::int64_t manifest_time() {
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return std::stoll(fixed);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "SOURCE_DATE_EPOCH is not an integer");
    }
  }
  return static_cast<std::int64_t>(std::time(nullptr));
}

class ManifestWriter {
 public:
  explicit ManifestWriter(const std::string& command) {
    j_["manifest_version"] = kManifestVersion;
    j_["tool_version"] = kToolVersion;
    j_["rng_version"] = kRngVersion;
    j_["command"] = command;
    j_["timestamps"]["started_unix"] = manifest_time();
  }

  nlohmann::json& inputs() { return j_["inputs"]; }
  nlohmann::json& outputs() { return j_["outputs"]; }
  nlohmann::json& config() { return j_["config"]; }
  void set(const std::string& key, const nlohmann::json& value) { j_[key] = value; }

  // Written next to the command's primary output.
  void write_for_output(const fs::path& out_path) {
    j_["timestamps"]["finished_unix"] = manifest_time();
    fs::path manifest_path;
    if (fs::is_directory(out_path)) {
      manifest_path = out_path / "manifest.json";
    } else {
      manifest_path = out_path.parent_path() / (out_path.stem().string() + ".manifest.json");
    }
    write_json_file(manifest_path, j_);
  }

  void write_to_stderr() {
    j_["timestamps"]["finished_unix"] = manifest_time();
    std::cerr << dump_json(j_) << "\n";
  }

 private:
  nlohmann::json j_;
};

FeatureVector load_single_feature_row(const fs::path& path) {
  const FeatureMatrix m = read_features(path);
  if (m.rows != 1) {
    throw Error(ErrorKind::InvalidArgument,
                path.string() + " must hold exactly one feature row, found " +
                    std::to_string(m.rows));
  }
  return m.row(0);
}

// ---------------------------------------------------------------------------
// train-aligner

struct TrainArgs {
  std::string features;
  std::string targets;
  std::string out;
  double ridge = kDefaultRidge;
  double holdout = 0.0;
};

void run_train(const TrainArgs& args) {
  const FeatureMatrix features = read_features(args.features);
  const FeatureMatrix targets = read_features(args.targets);

  AlignmentDataset train_split{features, targets};
  std::optional<AlignmentDataset> holdout_split;
  if (args.holdout > 0.0) {
    if (args.holdout >= 1.0) {
      throw Error(ErrorKind::InvalidArgument, "holdout fraction must be in (0, 1)");
    }
    if (features.rows != targets.rows) {
      throw Error(ErrorKind::DimMismatch,
                  "feature rows " + std::to_string(features.rows) + " vs target rows " +
                      std::to_string(targets.rows));
    }
    const auto held = static_cast<std::size_t>(
        args.holdout * static_cast<double>(features.rows) + 0.5);
    if (held == 0 || held >= features.rows) {
      throw Error(ErrorKind::InvalidArgument, "holdout fraction leaves no usable split");
    }
    const std::size_t kept = features.rows - held;
    const auto slice = [](const FeatureMatrix& m, std::size_t begin, std::size_t count) {
      FeatureMatrix out;
      out.rows = count;
      out.cols = m.cols;
      out.values.assign(m.values.begin() + static_cast<std::ptrdiff_t>(begin * m.cols),
                        m.values.begin() + static_cast<std::ptrdiff_t>((begin + count) * m.cols));
      return out;
    };
    train_split = AlignmentDataset{slice(features, 0, kept), slice(targets, 0, kept)};
    holdout_split = AlignmentDataset{slice(features, kept, held), slice(targets, kept, held)};
  }

  const AffineAligner aligner = train_aligner(train_split, args.ridge);
  save_aligner(args.out, aligner);

  const double train_mse = mean_squared_error(aligner, train_split);
  std::cout << "train_mse=" << format_double(train_mse) << "\n";

  ManifestWriter manifest("train-aligner");
  manifest.inputs()["features"] = args.features;
  manifest.inputs()["targets"] = args.targets;
  manifest.outputs()["aligner"] = args.out;
  manifest.config()["ridge"] = args.ridge;
  manifest.config()["holdout_fraction"] = args.holdout;
  manifest.set("train_mse", train_mse);
  if (holdout_split) {
    const double holdout_mse = mean_squared_error(aligner, *holdout_split);
    std::cout << "holdout_mse=" << format_double(holdout_mse) << "\n";
    manifest.set("holdout_mse", holdout_mse);
  }
  manifest.write_for_output(fs::path(args.out));
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
  std::string features;
  std::string aligner;
  std::string head;
  std::string bank;
  std::size_t class_index = 0;
  std::string method = "faithtrace";
  std::size_t top_k = 3;
  std::uint64_t seed = 0;
  bool verify = false;
  std::string out;  // empty: stdout
};

std::vector<Explanation> run_method(const std::string& method, const ConceptBank& bank,
                                    const AffineAligner& aligner,
                                    const ClassifierHead& head, std::size_t class_index,
                                    const FeatureVector& z, std::size_t k,
                                    std::uint64_t seed, RankDiagnostics* diag) {
  if (method == "faithtrace") {
    return rank_influence(bank, aligner, head, class_index, z, k, diag);
  }
  if (method == "t2c") {
    return rank_text_to_concept(bank, aligner, z, k);
  }
  if (method == "random") {
    return rank_random(bank, aligner, head, class_index, z, k, seed, diag);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method " + method);
}

void run_explain(const ExplainArgs& args) {
  const FeatureVector z = load_single_feature_row(args.features);
  const AffineAligner aligner = load_aligner(args.aligner);
  const auto head = load_head(args.head);
  const ConceptBank bank = load_bank(args.bank);
  if (args.class_index >= head->num_classes()) {
    throw Error(ErrorKind::InvalidClass,
                "class " + std::to_string(args.class_index) + " out of " +
                    std::to_string(head->num_classes()));
  }

  RankDiagnostics diag;
  const std::vector<Explanation> explanations =
      run_method(args.method, bank, aligner, *head, args.class_index, z, args.top_k,
                 args.seed, &diag);

  std::string lines;
  for (const Explanation& e : explanations) {
    lines += explanation_to_jsonl(e, args.method);
    lines += '\n';
  }
  if (args.out.empty()) {
    std::cout << lines;
  } else {
    write_text_file(args.out, lines);
  }
  for (const std::string& text : diag.degenerate_texts) {
    std::cerr << "skipped degenerate-direction candidate: " << text << "\n";
  }

  ManifestWriter manifest("explain");
  manifest.inputs()["features"] = args.features;
  manifest.inputs()["aligner"] = args.aligner;
  manifest.inputs()["head"] = args.head;
  manifest.inputs()["bank"] = args.bank;
  manifest.config()["method"] = args.method;
  manifest.config()["class_index"] = args.class_index;
  manifest.config()["top_k"] = args.top_k;
  manifest.config()["seed"] = args.seed;
  manifest.set("seed", args.seed);

  if (args.verify) {
    // Cross-check the closed-form direction of every candidate against the
    // central finite difference of the similarity.
    constexpr double kProbeDelta = 1e-6;
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    for (const ConceptEntry& entry : bank.entries) {
      DirectionVector dir;
      try {
        dir = direction_closed_form(aligner, z, entry.embedding);
      } catch (const Error& err) {
        if (err.kind() == ErrorKind::DegenerateDirection) continue;
        throw;
      }
      const FeatureVector probe = direction_finite_diff(aligner, z, entry.embedding, kProbeDelta);
      double diff_sq = 0.0;
      for (std::size_t i = 0; i < probe.size(); ++i) {
        const double d = probe[i] - dir.raw[i];
        diff_sq += d * d;
      }
      const double rel = std::sqrt(diff_sq) / l2_norm(dir.raw);
      if (rel > max_rel_err) max_rel_err = rel;
      ++checked;
    }
    std::cerr << "verify: max_relative_error=" << format_double(max_rel_err)
              << " over " << checked << " candidates\n";
    manifest.set("verify", nlohmann::json{{"max_relative_error", max_rel_err},
                                          {"candidates", checked},
                                          {"delta", kProbeDelta}});
  }

  if (args.out.empty()) {
    manifest.write_to_stderr();
  } else {
    manifest.outputs()["explanations"] = args.out;
    manifest.write_for_output(fs::path(args.out));
  }
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string samples_dir;
  std::string aligner;
  std::string head;
  std::string method = "faithtrace";
  std::vector<std::size_t> top_ks = {1, 3, 5};
  std::vector<std::string> metrics = {"ds", "curves"};
  std::vector<double> rhos;  // empty: CurveConfig default
  std::string out;
  std::string csv;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;  // 0: hardware concurrency
  bool raw_logit = false;
};

struct SampleInput {
  std::string sample_id;
  FeatureVector features;
  std::size_t class_index = 0;
  ConceptBank bank;
};

struct SampleOutcome {
  // Parallel arrays over the retrieved items at k_max.
  std::vector<std::string> texts;
  std::vector<double> scores;
  std::vector<InfluenceCurve> curves;  // empty when curves are not requested
  std::vector<std::string> skipped_texts;
};

std::vector<SampleInput> load_samples(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::InvalidArgument, dir.string() + " is not a directory");
  }
  std::vector<fs::path> sample_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
      sample_dirs.push_back(entry.path());
    }
  }
  std::sort(sample_dirs.begin(), sample_dirs.end());
  if (sample_dirs.empty()) {
    throw Error(ErrorKind::EmptyInput, "no sample directories under " + dir.string());
  }
  std::vector<SampleInput> samples;
  samples.reserve(sample_dirs.size());
  for (const fs::path& sample_dir : sample_dirs) {
    SampleInput input;
    const nlohmann::json meta = read_json_file(sample_dir / "meta.json");
    input.sample_id = meta.value("sample_id", sample_dir.filename().string());
    if (!meta.contains("class_index") || !meta.at("class_index").is_number_unsigned()) {
      throw Error(ErrorKind::ParseError,
                  (sample_dir / "meta.json").string() + " needs an unsigned class_index");
    }
    input.class_index = meta.at("class_index").get<std::size_t>();
    input.features = load_single_feature_row(sample_dir / "features.ftm");
    input.bank = load_bank(sample_dir / "bank.json");
    samples.push_back(std::move(input));
  }
  return samples;
}

SampleOutcome process_sample(const SampleInput& sample, const AffineAligner& aligner,
                             const ClassifierHead& head, const std::string& method,
                             std::size_t k_max, std::uint64_t sample_seed,
                             bool want_curves, const CurveConfig& curve_cfg) {
  RankDiagnostics diag;
  const std::vector<Explanation> retrieved =
      run_method(method, sample.bank, aligner, head, sample.class_index,
                 sample.features, k_max, sample_seed, &diag);

  // Every method is measured with the same directional-score metric, so
  // re-derive the direction for entries the method did not score that way.
  std::map<std::string, const ConceptEntry*> by_text;
  for (const ConceptEntry& entry : sample.bank.entries) by_text[entry.text] = &entry;

  SampleOutcome outcome;
  outcome.skipped_texts = std::move(diag.degenerate_texts);
  for (const Explanation& e : retrieved) {
    DirectionVector dir;
    double score = 0.0;
    if (e.direction) {
      dir = *e.direction;
      score = e.score;
    } else {
      const auto it = by_text.find(e.text);
      if (it == by_text.end()) {
        throw Error(ErrorKind::InvalidArgument,
                    "retrieved text missing from bank: " + e.text);
      }
      try {
        dir = direction_closed_form(aligner, sample.features, it->second->embedding);
      } catch (const Error& err) {
        if (err.kind() == ErrorKind::DegenerateDirection) {
          outcome.skipped_texts.push_back(e.text);
          continue;
        }
        throw;
      }
      score = directional_score(head, sample.class_index, sample.features, dir);
    }
    outcome.texts.push_back(e.text);
    outcome.scores.push_back(score);
    if (want_curves) {
      outcome.curves.push_back(
          influence_curve(head, sample.class_index, sample.features, dir, curve_cfg));
    }
  }
  return outcome;
}

InfluenceCurve mean_curve(const std::vector<InfluenceCurve>& curves) {
  InfluenceCurve mean;
  mean.rhos = curves.front().rhos;
  const std::size_t steps = mean.rhos.size();
  mean.insertion.assign(steps, 0.0);
  mean.deletion.assign(steps, 0.0);
  for (const InfluenceCurve& curve : curves) {
    for (std::size_t i = 0; i < steps; ++i) {
      mean.insertion[i] += curve.insertion[i];
      mean.deletion[i] += curve.deletion[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(curves.size());
  for (std::size_t i = 0; i < steps; ++i) {
    mean.insertion[i] *= inv;
    mean.deletion[i] *= inv;
    mean.insertion_sum += mean.insertion[i];
    mean.deletion_sum += mean.deletion[i];
  }
  return mean;
}

void run_evaluate(const EvaluateArgs& args) {
  if (args.top_ks.empty()) {
    throw Error(ErrorKind::InvalidArgument, "at least one top-k value is required");
  }
  bool want_ds = false;
  bool want_curves = false;
  for (const std::string& metric : args.metrics) {
    if (metric == "ds") want_ds = true;
    else if (metric == "curves") want_curves = true;
    else throw Error(ErrorKind::InvalidArgument, "unknown metric " + metric);
  }
  if (!want_ds && !want_curves) {
    throw Error(ErrorKind::InvalidArgument, "no metrics requested");
  }
  if (!args.csv.empty() && !want_curves) {
    throw Error(ErrorKind::InvalidArgument, "--csv needs the curves metric");
  }

  CurveConfig curve_cfg;
  if (!args.rhos.empty()) curve_cfg.rhos = args.rhos;
  curve_cfg.use_margin_confidence = !args.raw_logit;
  validate(curve_cfg);

  const AffineAligner aligner = load_aligner(args.aligner);
  const auto head = load_head(args.head);
  const std::vector<SampleInput> samples = load_samples(args.samples_dir);
  const std::size_t k_max = *std::max_element(args.top_ks.begin(), args.top_ks.end());

  // Bounded worker pool; results are indexed so output order never depends
  // on completion order.
  std::vector<SampleOutcome> outcomes(samples.size());
  std::vector<std::exception_ptr> failures(samples.size());
  std::size_t jobs = args.jobs > 0 ? args.jobs : std::thread::hardware_concurrency();
  if (jobs == 0) jobs = 1;
  jobs = std::min(jobs, samples.size());
  std::atomic<std::size_t> cursor{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= samples.size()) break;
      try {
        outcomes[i] = process_sample(samples[i], aligner, *head, args.method, k_max,
                                     Rng::derive_seed(args.seed, i), want_curves,
                                     curve_cfg);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  nlohmann::json report_json;
  report_json["method"] = args.method;
  report_json["tool_version"] = kToolVersion;
  report_json["pooling"] = "pair";
  report_json["confidence"] = curve_cfg.use_margin_confidence ? "margin" : "raw_logit";
  report_json["values_scale"] = "raw";
  nlohmann::json sections = nlohmann::json::array();

  std::optional<AggregateStats> csv_stats;
  std::size_t csv_top_k = 0;
  for (const std::size_t k : args.top_ks) {
    EvaluationReport report;
    report.method = args.method;
    report.top_k = k;
    std::vector<double> item_scores;
    std::vector<InfluenceCurve> item_curves;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SampleOutcome& outcome = outcomes[i];
      const std::size_t take = std::min(k, outcome.texts.size());
      SampleRecord record;
      record.sample_id = samples[i].sample_id;
      record.class_index = samples[i].class_index;
      for (std::size_t j = 0; j < take; ++j) {
        record.texts.push_back(outcome.texts[j]);
        record.scores.push_back(outcome.scores[j]);
        item_scores.push_back(outcome.scores[j]);
        if (want_curves) item_curves.push_back(outcome.curves[j]);
      }
      if (want_curves && take > 0) {
        record.curve = mean_curve({outcome.curves.begin(),
                                   outcome.curves.begin() + static_cast<std::ptrdiff_t>(take)});
      }
      report.per_sample.push_back(std::move(record));
    }
    report.stats = aggregate(item_scores, item_curves);
    sections.push_back(report_to_json(report));
    // CSV mirrors the k = 3 sweep when present, else the first section.
    if (!csv_stats || (k == 3 && csv_top_k != 3)) {
      csv_stats = report.stats;
      csv_top_k = k;
    }
  }
  report_json["sections"] = std::move(sections);
  write_json_file(args.out, report_json);

  if (!args.csv.empty() && csv_stats && csv_stats->has_curves) {
    write_text_file(args.csv, curves_to_csv(args.method, *csv_stats));
  }

  ManifestWriter manifest("evaluate");
  manifest.inputs()["samples"] = args.samples_dir;
  manifest.inputs()["aligner"] = args.aligner;
  manifest.inputs()["head"] = args.head;
  manifest.outputs()["report"] = args.out;
  if (!args.csv.empty()) manifest.outputs()["csv"] = args.csv;
  manifest.config()["method"] = args.method;
  manifest.config()["top_ks"] = args.top_ks;
  manifest.config()["metrics"] = args.metrics;
  manifest.config()["rhos"] = vector_to_json(curve_cfg.rhos);
  manifest.config()["confidence"] = curve_cfg.use_margin_confidence ? "margin" : "raw_logit";
  manifest.config()["seed"] = args.seed;
  manifest.set("seed", args.seed);
  manifest.config()["jobs"] = jobs;
  manifest.write_for_output(fs::path(args.out));
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 8;
  std::size_t embed_dim = 12;
  std::size_t classes = 3;
  std::size_t samples = 10;
  std::size_t bank_size = 10;
  std::size_t train_count = 0;
  double noise_sigma = 0.0;
  std::string head = "linear";
};

void run_synth(const SynthArgs& args) {
  SynthSpec spec;
  spec.seed = args.seed;
  spec.feature_dim = args.feature_dim;
  spec.embed_dim = args.embed_dim;
  spec.num_classes = args.classes;
  spec.num_samples = args.samples;
  spec.bank_size = args.bank_size;
  spec.train_count = args.train_count;
  spec.noise_sigma = args.noise_sigma;
  if (args.head == "linear") {
    spec.head_kind = HeadKind::kLinear;
  } else if (args.head == "mlp") {
    spec.head_kind = HeadKind::kMlp;
  } else {
    throw Error(ErrorKind::InvalidArgument, "head must be linear or mlp");
  }

  const SyntheticWorld world = synth_world(spec);
  fs::create_directories(args.out);
  write_world(world, args.out);
  std::cout << "synth: wrote " << world.samples.size() << " samples under " << args.out
            << "\n";

  ManifestWriter manifest("synth");
  manifest.outputs()["world"] = args.out;
  manifest.config()["seed"] = args.seed;
  manifest.set("seed", args.seed);
  manifest.config()["feature_dim"] = args.feature_dim;
  manifest.config()["embed_dim"] = args.embed_dim;
  manifest.config()["classes"] = args.classes;
  manifest.config()["samples"] = args.samples;
  manifest.config()["bank_size"] = args.bank_size;
  manifest.config()["train_count"] = args.train_count;
  manifest.config()["noise_sigma"] = args.noise_sigma;
  manifest.config()["head"] = args.head;
  manifest.write_for_output(fs::path(args.out));
}

// ---------------------------------------------------------------------------
// gen-bank

struct GenBankArgs {
  std::string class_name;
  std::string out;
  std::string endpoint;
  std::string mock_script;
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t llm_count = 100;
  std::size_t vlm_count = 30;
  std::size_t batch_size = 10;
  std::size_t max_retries = 3;
  double timeout = 30.0;
  std::string image;
  std::string embeddings;
  std::string sample_id;
};

void run_gen_bank(const GenBankArgs& args) {
  GenConfig cfg;
  cfg.endpoint_url = args.endpoint;
  cfg.model_name = args.model;
  cfg.llm_target_count = args.llm_count;
  cfg.vlm_target_count = args.vlm_count;
  cfg.batch_size = args.batch_size;
  cfg.max_retries = args.max_retries;
  cfg.timeout_seconds = args.timeout;

  std::unique_ptr<ChatTransport> transport;
  if (!args.mock_script.empty()) {
    transport = std::make_unique<ScriptedChatTransport>(
        ScriptedChatTransport::from_file(args.mock_script));
  } else {
    if (args.endpoint.empty()) {
      throw Error(ErrorKind::InvalidArgument, "either --endpoint or --mock-script is required");
    }
    if (const char* key = std::getenv(args.api_key_env.c_str())) cfg.api_key = key;
    transport = std::make_unique<HttpChatTransport>(cfg);
  }

  std::optional<fs::path> image_path;
  if (!args.image.empty()) image_path = fs::path(args.image);
  const GenResult result = generate_bank(cfg, args.class_name, *transport, image_path);
  for (const std::string& note : result.notes) std::cerr << note << "\n";

  if (!args.embeddings.empty()) {
    const ConceptBank bank = attach_embeddings(
        result.concepts, fs::path(args.embeddings), args.class_name,
        args.sample_id.empty() ? std::nullopt : std::make_optional(args.sample_id));
    save_bank(args.out, bank);
  } else {
    nlohmann::json j;
    j["class"] = args.class_name;
    nlohmann::json concepts = nlohmann::json::array();
    for (const GeneratedConcept& generated : result.concepts) {
      concepts.push_back({{"text", generated.text},
                          {"source", concept_source_name(generated.source)}});
    }
    j["concepts"] = std::move(concepts);
    j["stalled"] = result.stalled;
    j["generator"] = {{"model", args.mock_script.empty() ? args.model : "mock"},
                      {"decoding", "endpoint defaults"}};
    write_json_file(args.out, j);
  }

  ManifestWriter manifest("gen-bank");
  manifest.inputs()["mock_script"] = args.mock_script;
  manifest.inputs()["endpoint"] = args.endpoint;
  if (!args.embeddings.empty()) manifest.inputs()["embeddings"] = args.embeddings;
  manifest.outputs()["bank"] = args.out;
  manifest.config()["class_name"] = args.class_name;
  manifest.config()["model"] = args.model;
  manifest.config()["llm_count"] = args.llm_count;
  manifest.config()["vlm_count"] = args.vlm_count;
  manifest.config()["batch_size"] = args.batch_size;
  manifest.config()["max_retries"] = args.max_retries;
  manifest.config()["requests_made"] = transport->requests_made();
  manifest.config()["stalled"] = result.stalled;
  manifest.write_for_output(fs::path(args.out));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Textual-explanation engine for image classifiers: ranks concept "
               "texts by directional-derivative influence and evaluates their "
               "faithfulness"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train-aligner",
                                   "Fit the affine feature-space aligner by least squares");
  train->add_option("--features", train_args.features, "FTM1 matrix of classifier features")
      ->required();
  train->add_option("--targets", train_args.targets, "FTM1 matrix of image embeddings")
      ->required();
  train->add_option("--out", train_args.out, "Output aligner JSON")->required();
  train->add_option("--ridge", train_args.ridge, "Ridge added to the normal equations");
  train->add_option("--holdout", train_args.holdout,
                    "Fraction of trailing rows held out for reporting MSE");
  train->callback([&] { run_train(train_args); });

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Rank a concept bank for one sample");
  explain->add_option("--features", explain_args.features, "FTM1 file with one feature row")
      ->required();
  explain->add_option("--aligner", explain_args.aligner, "Aligner JSON")->required();
  explain->add_option("--head", explain_args.head, "Classifier head JSON")->required();
  explain->add_option("--bank", explain_args.bank, "Concept bank JSON")->required();
  explain->add_option("--class", explain_args.class_index, "Class index to explain")
      ->required();
  explain->add_option("--method", explain_args.method, "faithtrace | t2c | random")
      ->check(CLI::IsMember({"faithtrace", "t2c", "random"}));
  explain->add_option("--top-k", explain_args.top_k, "Number of explanations");
  explain->add_option("--seed", explain_args.seed, "Seed for the random baseline");
  explain->add_flag("--verify", explain_args.verify,
                    "Cross-check closed-form directions against finite differences");
  explain->add_option("--out", explain_args.out, "Write JSON lines here instead of stdout");
  explain->callback([&] { run_explain(explain_args); });

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate",
                                      "Score a sample directory and aggregate metrics");
  evaluate->add_option("--samples", eval_args.samples_dir,
                       "Directory of <sample_id>/{features.ftm,bank.json,meta.json}")
      ->required();
  evaluate->add_option("--aligner", eval_args.aligner, "Aligner JSON")->required();
  evaluate->add_option("--head", eval_args.head, "Classifier head JSON")->required();
  evaluate->add_option("--method", eval_args.method, "faithtrace | t2c | random")
      ->check(CLI::IsMember({"faithtrace", "t2c", "random"}));
  evaluate->add_option("--top-k", eval_args.top_ks, "Top-k settings (repeat or comma-separate)")
      ->delimiter(',');
  evaluate->add_option("--metrics", eval_args.metrics, "ds,curves")->delimiter(',');
  evaluate->add_option("--rhos", eval_args.rhos, "Relative step sizes for curves")
      ->delimiter(',');
  evaluate->add_option("--out", eval_args.out, "Output report JSON")->required();
  evaluate->add_option("--csv", eval_args.csv, "Output curves CSV");
  evaluate->add_option("--seed", eval_args.seed, "Seed for the random baseline");
  evaluate->add_option("--jobs", eval_args.jobs, "Worker threads (default: logical cores)");
  evaluate->add_flag("--raw-logit", eval_args.raw_logit,
                     "Curve deltas on raw logits instead of margin confidence");
  evaluate->callback([&] { run_evaluate(eval_args); });

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic world");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--seed", synth_args.seed, "World seed");
  synth->add_option("--feature-dim", synth_args.feature_dim, "Classifier feature dim d");
  synth->add_option("--embed-dim", synth_args.embed_dim, "Joint embedding dim m");
  synth->add_option("--classes", synth_args.classes, "Number of classes");
  synth->add_option("--samples", synth_args.samples, "Number of evaluation samples");
  synth->add_option("--bank-size", synth_args.bank_size, "Concepts per sample bank");
  synth->add_option("--train-count", synth_args.train_count,
                    "Aligner training rows (default 4 * (d + 1))");
  synth->add_option("--noise-sigma", synth_args.noise_sigma, "Gaussian noise on targets");
  synth->add_option("--head", synth_args.head, "linear | mlp")
      ->check(CLI::IsMember({"linear", "mlp"}));
  synth->callback([&] { run_synth(synth_args); });

  GenBankArgs gen_args;
  auto* gen = app.add_subcommand("gen-bank",
                                 "Populate a concept bank via a chat-completions endpoint");
  gen->add_option("--class-name", gen_args.class_name, "Target class name")->required();
  gen->add_option("--out", gen_args.out, "Output JSON")->required();
  gen->add_option("--endpoint", gen_args.endpoint, "Base URL of the endpoint");
  gen->add_option("--mock-script", gen_args.mock_script,
                  "JSON array of canned responses replacing the endpoint");
  gen->add_option("--model", gen_args.model, "Model name");
  gen->add_option("--api-key-env", gen_args.api_key_env, "Env var holding the API key");
  gen->add_option("--llm-count", gen_args.llm_count, "Class-level concept target");
  gen->add_option("--vlm-count", gen_args.vlm_count, "Image-grounded concept target");
  gen->add_option("--batch-size", gen_args.batch_size, "Concepts requested per call");
  gen->add_option("--max-retries", gen_args.max_retries, "HTTP retries per request");
  gen->add_option("--timeout", gen_args.timeout, "HTTP timeout in seconds");
  gen->add_option("--image", gen_args.image, "Image file attached in the second phase");
  gen->add_option("--embeddings", gen_args.embeddings,
                  "FTM1 text embeddings (one row per generated concept)");
  gen->add_option("--sample-id", gen_args.sample_id, "Sample id stored in the bank");
  gen->callback([&] { run_gen_bank(gen_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
