#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithtrace/explainer.hpp"

namespace faithtrace {

struct GenConfig {
  std::string endpoint_url;  // base URL; /v1/chat/completions is appended
  std::string api_key;       // sent as a bearer token when nonempty
  std::string model_name = "gpt-3.5-turbo";
  std::size_t llm_target_count = 100;
  std::size_t vlm_target_count = 30;
  // Concepts each request asks for. The template text itself fixes the
  // request at ~10; this knob only sizes accounting and round caps.
  std::size_t batch_size = 10;
  std::size_t max_retries = 3;
  double timeout_seconds = 30.0;
};

enum class PromptMode { kLlm, kVlm };

// Fills the generation template for the given mode with {class_name} and
// {existing_concepts} (comma-joined, or "none" when empty).
std::string render_prompt(const std::string& class_name,
                          const std::vector<std::string>& existing, PromptMode mode);

// Chat-completions request body; image_data_url attaches a base64 image part.
nlohmann::json build_chat_request(const GenConfig& cfg, const std::string& prompt,
                                  const std::optional<std::string>& image_data_url);

// Assistant message content out of a chat-completions response body.
// Throws ParseError on malformed responses.
std::string parse_chat_content(const std::string& response_body);

// Lines of the form "- phrase", trimmed.
std::vector<std::string> parse_bullet_lines(const std::string& content);

std::string base64_encode(const std::string& bytes);

// Data URL (data:<mime>;base64,...) for an image file, mime by extension.
std::string image_file_to_data_url(const std::filesystem::path& path);

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::string& prompt,
                               const std::optional<std::string>& image_data_url) = 0;
  virtual std::size_t requests_made() const = 0;
};

// Synchronous client for an OpenAI-compatible endpoint. Transport failures
// and 429/5xx responses are retried with exponential backoff; other error
// statuses fail immediately. Throws HttpError once retries are exhausted.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(GenConfig cfg);
  std::string complete(const std::string& prompt,
                       const std::optional<std::string>& image_data_url) override;
  std::size_t requests_made() const override { return requests_; }

 protected:
  struct PostResult {
    bool transport_ok = false;
    int status = 0;
    std::string body;
  };
  virtual PostResult post_once(const std::string& request_body);
  virtual void backoff_sleep(std::chrono::milliseconds delay);

  GenConfig cfg_;

 private:
  std::size_t requests_ = 0;
};

// Replays canned assistant responses in order; empty string once exhausted.
// Substituted for the HTTP transport in offline runs and tests.
class ScriptedChatTransport : public ChatTransport {
 public:
  explicit ScriptedChatTransport(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  static ScriptedChatTransport from_file(const std::filesystem::path& path);

  std::string complete(const std::string& prompt,
                       const std::optional<std::string>& image_data_url) override;
  std::size_t requests_made() const override { return requests_; }

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  std::size_t requests_ = 0;
};

struct GeneratedConcept {
  std::string text;
  ConceptSource source = ConceptSource::kLlm;
};

struct GenResult {
  std::vector<GeneratedConcept> concepts;
  bool stalled = false;  // a phase hit kStallLimit empty rounds
  std::vector<std::string> notes;
};

// Consecutive rounds that add nothing before a phase gives up.
inline constexpr std::size_t kStallLimit = 3;

// Two-phase generation (class-level, then image-grounded concepts), feeding
// accepted concepts back into each prompt. Post-processing drops case-fold
// duplicates, phrases containing the class name, and phrases over 5 words.
// A stalled phase returns the partial bank with a warning note.
GenResult generate_bank(const GenConfig& cfg, const std::string& class_name,
                        ChatTransport& transport,
                        const std::optional<std::filesystem::path>& image_path = {});

// Pairs generated texts with precomputed embeddings (one row per text, in
// order) and unit-normalizes them. Throws CountMismatch / DimMismatch /
// ZeroNorm (per entry).
ConceptBank attach_embeddings(const std::vector<GeneratedConcept>& concepts,
                              const FeatureMatrix& embeddings,
                              const std::string& class_label,
                              const std::optional<std::string>& sample_id = {});
ConceptBank attach_embeddings(const std::vector<GeneratedConcept>& concepts,
                              const std::filesystem::path& embedding_file,
                              const std::string& class_label,
                              const std::optional<std::string>& sample_id = {});

}  // namespace faithtrace
