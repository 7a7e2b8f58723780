#include "faithtrace/modelio.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "faithtrace/influence.hpp"
#include "faithtrace/jsonio.hpp"
#include "faithtrace/rng.hpp"

namespace faithtrace {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'M', '1'};
constexpr std::size_t kHeaderBytes = 12;

std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

}  // namespace

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  unsigned char header[kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) {
    throw Error(ErrorKind::TruncatedFile, path.string() + " shorter than the 12-byte header");
  }
  if (std::memcmp(header, kMagic, 4) != 0) {
    throw Error(ErrorKind::BadMagic, path.string() + " does not start with FTM1");
  }
  const std::uint32_t rows = load_u32_le(header + 4);
  const std::uint32_t cols = load_u32_le(header + 8);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;

  std::vector<unsigned char> payload(count * 4);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size())) {
    throw Error(ErrorKind::TruncatedFile,
                path.string() + " payload holds " + std::to_string(in.gcount()) +
                    " bytes, header claims " + std::to_string(payload.size()));
  }

  FeatureMatrix matrix;
  matrix.rows = rows;
  matrix.cols = cols;
  matrix.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = load_u32_le(payload.data() + i * 4);
    const float value = std::bit_cast<float>(bits);
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::NonFinite,
                  path.string() + " has a non-finite value at byte offset " +
                      std::to_string(kHeaderBytes + i * 4));
    }
    matrix.values[i] = static_cast<double>(value);
  }
  return matrix;
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& matrix) {
  require_finite(matrix, "feature matrix " + path.string());
  if (matrix.rows > UINT32_MAX || matrix.cols > UINT32_MAX) {
    throw Error(ErrorKind::InvalidArgument, "matrix too large for the FTM1 header");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  }
  unsigned char header[kHeaderBytes];
  std::memcpy(header, kMagic, 4);
  store_u32_le(header + 4, static_cast<std::uint32_t>(matrix.rows));
  store_u32_le(header + 8, static_cast<std::uint32_t>(matrix.cols));
  out.write(reinterpret_cast<const char*>(header), kHeaderBytes);

  std::vector<unsigned char> payload(matrix.values.size() * 4);
  for (std::size_t i = 0; i < matrix.values.size(); ++i) {
    const float quantized = static_cast<float>(matrix.values[i]);
    if (!std::isfinite(quantized)) {
      throw Error(ErrorKind::NonFinite,
                  "value at flat index " + std::to_string(i) + " overflows 32-bit float");
    }
    store_u32_le(payload.data() + i * 4, std::bit_cast<std::uint32_t>(quantized));
  }
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) {
    throw Error(ErrorKind::IoError, "short write to " + path.string());
  }
}

namespace {

FeatureVector random_gaussian_vector(Rng& rng, std::size_t n, double scale) {
  FeatureVector v(n);
  for (double& x : v) x = rng.gaussian() * scale;
  return v;
}

FeatureMatrix random_gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                                     double scale) {
  FeatureMatrix m(rows, cols);
  for (double& x : m.values) x = rng.gaussian() * scale;
  return m;
}

FeatureVector random_unit_vector(Rng& rng, std::size_t n) {
  while (true) {
    FeatureVector v = random_gaussian_vector(rng, n, 1.0);
    if (l2_norm(v) > 1e-6) return normalize(v);
  }
}

std::shared_ptr<ClassifierHead> make_head(const SynthSpec& spec, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.feature_dim));
  if (spec.head_kind == HeadKind::kLinear) {
    return std::make_shared<LinearHead>(
        random_gaussian_matrix(rng, spec.num_classes, spec.feature_dim, scale),
        random_gaussian_vector(rng, spec.num_classes, 0.1), std::vector<std::string>{});
  }
  const std::size_t hidden = 2 * spec.feature_dim;
  return std::make_shared<MlpHead>(
      random_gaussian_matrix(rng, hidden, spec.feature_dim, scale),
      random_gaussian_vector(rng, hidden, 0.1),
      random_gaussian_matrix(rng, spec.num_classes, hidden,
                             1.0 / std::sqrt(static_cast<double>(hidden))),
      random_gaussian_vector(rng, spec.num_classes, 0.1), std::vector<std::string>{});
}

std::size_t argmax(const FeatureVector& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// Text embedding whose induced direction points (after pullback through W)
// along the head gradient, giving a strictly positive directional score.
FeatureVector plant_positive_embedding(const AffineAligner& aligner,
                                       const FeatureVector& z,
                                       const FeatureVector& gradient) {
  const FeatureVector aligned = aligner.apply(z);
  const FeatureVector h_hat = normalize(aligned);
  const FeatureVector pushed = matvec(aligner.W, gradient);
  // Component of W g orthogonal to the aligned feature.
  FeatureVector ortho = axpy(pushed, -dot(pushed, h_hat), h_hat);
  if (l2_norm(ortho) < 1e-9) {
    // Gradient pushes straight along the aligned feature; fall back to any
    // direction orthogonal to it.
    FeatureVector basis(h_hat.size(), 0.0);
    basis[argmax(h_hat) == 0 ? 1 : 0] = 1.0;
    ortho = axpy(basis, -dot(basis, h_hat), h_hat);
  }
  return normalize(axpy(h_hat, 1.0, normalize(ortho)));
}

}  // namespace

SyntheticWorld synth_world(const SynthSpec& spec) {
  if (spec.feature_dim < 2 || spec.embed_dim < 2 || spec.num_classes < 2) {
    throw Error(ErrorKind::InvalidArgument, "world needs d, m >= 2 and C >= 2");
  }
  if (spec.num_samples == 0 || spec.bank_size < 2) {
    throw Error(ErrorKind::InvalidArgument, "world needs samples and bank_size >= 2");
  }

  SyntheticWorld world;
  world.spec = spec;
  Rng rng(spec.seed);

  const double aligner_scale = 1.0 / std::sqrt(static_cast<double>(spec.feature_dim));
  world.true_aligner.W =
      random_gaussian_matrix(rng, spec.embed_dim, spec.feature_dim, aligner_scale);
  world.true_aligner.b = random_gaussian_vector(rng, spec.embed_dim, 0.1);
  world.head = make_head(spec, rng);

  const std::size_t train_count =
      spec.train_count > 0 ? spec.train_count : 4 * (spec.feature_dim + 1);
  world.train.features = random_gaussian_matrix(rng, train_count, spec.feature_dim, 1.0);
  world.train.targets = FeatureMatrix(train_count, spec.embed_dim);
  for (std::size_t s = 0; s < train_count; ++s) {
    const FeatureVector target = world.true_aligner.apply(world.train.features.row(s));
    for (std::size_t j = 0; j < spec.embed_dim; ++j) {
      world.train.targets.at(s, j) = target[j] + spec.noise_sigma * rng.gaussian();
    }
  }

  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    SyntheticSample sample;
    char id[16];
    std::snprintf(id, sizeof(id), "s%04zu", i);
    sample.sample_id = id;
    sample.features = random_gaussian_vector(rng, spec.feature_dim, 1.0);
    sample.class_index = argmax(world.head->logits(sample.features));

    const FeatureVector gradient = world.head->grad(sample.features, sample.class_index);
    const FeatureVector planted =
        plant_positive_embedding(world.true_aligner, sample.features, gradient);
    const DirectionVector planted_dir =
        direction_closed_form(world.true_aligner, sample.features, planted);
    const double planted_score =
        directional_score(*world.head, sample.class_index, sample.features, planted_dir);

    sample.planted_text = "planted evidence";
    sample.bank.class_label = world.head->class_names()[sample.class_index];
    sample.bank.sample_id = sample.sample_id;
    ConceptEntry planted_entry;
    planted_entry.text = sample.planted_text;
    planted_entry.embedding = planted;
    sample.bank.entries.push_back(std::move(planted_entry));

    // Fill with random candidates, redrawing any that would rival the
    // planted concept so its rank-1 margin is unambiguous.
    for (std::size_t b = 1; b < spec.bank_size; ++b) {
      ConceptEntry entry;
      char text[32];
      std::snprintf(text, sizeof(text), "concept %03zu", b);
      entry.text = text;
      for (int attempt = 0; attempt < 256; ++attempt) {
        entry.embedding = random_unit_vector(rng, spec.embed_dim);
        try {
          const DirectionVector dir =
              direction_closed_form(world.true_aligner, sample.features, entry.embedding);
          const double score =
              directional_score(*world.head, sample.class_index, sample.features, dir);
          if (score < 0.5 * planted_score) break;
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::DegenerateDirection) throw;
          // keep the draw; a degenerate candidate exercises the skip path
          break;
        }
      }
      sample.bank.entries.push_back(std::move(entry));
    }
    world.samples.push_back(std::move(sample));
  }
  return world;
}

void write_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "samples");
  save_head(dir / "head.json", *world.head);
  save_aligner(dir / "aligner_true.json", world.true_aligner);
  write_features(dir / "train_features.ftm", world.train.features);
  write_features(dir / "train_targets.ftm", world.train.targets);

  for (const SyntheticSample& sample : world.samples) {
    const fs::path sample_dir = dir / "samples" / sample.sample_id;
    fs::create_directories(sample_dir);
    FeatureMatrix feature_row;
    feature_row.rows = 1;
    feature_row.cols = sample.features.size();
    feature_row.values = sample.features;
    write_features(sample_dir / "features.ftm", feature_row);
    save_bank(sample_dir / "bank.json", sample.bank);

    nlohmann::json meta;
    meta["sample_id"] = sample.sample_id;
    meta["class_index"] = sample.class_index;
    meta["planted_text"] = sample.planted_text;
    write_json_file(sample_dir / "meta.json", meta);
  }
}

}  // namespace faithtrace
