#include "faithtrace/conceptbank_gen.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "faithtrace/jsonio.hpp"
#include "faithtrace/modelio.hpp"

namespace faithtrace {

namespace {

constexpr const char* kLlmTemplate =
    R"(Important guidelines for generating visual concepts:
1. Generate GENERAL concepts that can apply to many different photos of the same object type.
2. Include both OBJECT features (e.g., shape, color, parts) AND CONTEXT features (e.g., background, environment, setting).
3. Keep concepts short and specific (1-3 words).
4. DO NOT include class names or object names directly.

Q: What are useful visual features for distinguishing a lemur in a photo?
A: There are several useful visual features to tell there is a lemur in a photo:
- long tail
- large eyes
- gray fur
- trees
- branches
- forest

Q: What are useful features for distinguishing a {class_name} in a photo?
Already generated concepts (DO NOT repeat these): {existing_concepts}.
A: There are several useful visual features to tell there is a {class_name} in a photo. Generate approximately 10 visual concepts to provide comprehensive coverage:)";

constexpr const char* kVlmTemplate =
    R"(Important guidelines for generating visual concepts:
1. Generate DETAILED and SPECIFIC concepts that can apply to this image.
2. Include both OBJECT features (e.g., shape, color, parts) AND CONTEXT features (e.g., background, environment, setting).
3. Keep concepts short and specific (1-3 words).
4. DO NOT include class names or object names directly.

Examples:
Q: Look at this image carefully. Based on what you can actually see in the image, identify useful visual features that help distinguish this as a koi fish.
A: There are several useful visual features to tell there is a koi fish in a photo:
- bright orange scales
- curved tail fin
- spotted pattern
- long body
- pointed snout
- water surface

Q: Look at this image carefully. Based on what you can actually see in the image, identify useful visual features that help distinguish this as a {class_name}.
Already generated concepts (DO NOT repeat these): {existing_concepts}.
A: There are several useful visual features to tell there is a {class_name} in a photo. Generate approximately 10 visual concepts to provide comprehensive coverage:)";

void replace_all(std::string& text, const std::string& needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::string casefold(const std::string& text) {
  std::string out = text;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::size_t word_count(const std::string& text) {
  std::istringstream stream(text);
  std::string word;
  std::size_t count = 0;
  while (stream >> word) ++count;
  return count;
}

}  // namespace

std::string render_prompt(const std::string& class_name,
                          const std::vector<std::string>& existing, PromptMode mode) {
  if (class_name.empty()) {
    throw Error(ErrorKind::InvalidArgument, "class name must be nonempty");
  }
  std::string prompt = mode == PromptMode::kLlm ? kLlmTemplate : kVlmTemplate;
  std::string joined;
  if (existing.empty()) {
    joined = "none";
  } else {
    for (std::size_t i = 0; i < existing.size(); ++i) {
      if (i > 0) joined += ", ";
      joined += existing[i];
    }
  }
  replace_all(prompt, "{class_name}", class_name);
  replace_all(prompt, "{existing_concepts}", joined);
  return prompt;
}

nlohmann::json build_chat_request(const GenConfig& cfg, const std::string& prompt,
                                  const std::optional<std::string>& image_data_url) {
  nlohmann::json message;
  message["role"] = "user";
  if (image_data_url) {
    nlohmann::json parts = nlohmann::json::array();
    parts.push_back({{"type", "text"}, {"text", prompt}});
    parts.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", *image_data_url}}}});
    message["content"] = std::move(parts);
  } else {
    message["content"] = prompt;
  }
  nlohmann::json body;
  body["model"] = cfg.model_name;
  body["messages"] = nlohmann::json::array({std::move(message)});
  return body;
}

std::string parse_chat_content(const std::string& response_body) {
  nlohmann::json j = nlohmann::json::parse(response_body, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorKind::ParseError, "response body is not valid JSON");
  }
  if (!j.contains("choices") || !j.at("choices").is_array() || j.at("choices").empty()) {
    throw Error(ErrorKind::ParseError, "response has no choices");
  }
  const auto& message = j.at("choices").at(0).at("message");
  if (!message.contains("content") || !message.at("content").is_string()) {
    throw Error(ErrorKind::ParseError, "response message has no string content");
  }
  return message.at("content").get<std::string>();
}

std::vector<std::string> parse_bullet_lines(const std::string& content) {
  std::vector<std::string> out;
  std::istringstream stream(content);
  std::string line;
  while (std::getline(stream, line)) {
    const std::string trimmed = trim(line);
    if (trimmed.size() >= 2 && trimmed[0] == '-') {
      const std::string phrase = trim(trimmed.substr(1));
      if (!phrase.empty()) out.push_back(phrase);
    }
  }
  return out;
}

std::string base64_encode(const std::string& bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const unsigned int chunk = (static_cast<unsigned char>(bytes[i]) << 16) |
                               (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                               static_cast<unsigned char>(bytes[i + 2]);
    out += alphabet[(chunk >> 18) & 0x3f];
    out += alphabet[(chunk >> 12) & 0x3f];
    out += alphabet[(chunk >> 6) & 0x3f];
    out += alphabet[chunk & 0x3f];
    i += 3;
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned int chunk = static_cast<unsigned char>(bytes[i]) << 16;
    out += alphabet[(chunk >> 18) & 0x3f];
    out += alphabet[(chunk >> 12) & 0x3f];
    out += "==";
  } else if (rest == 2) {
    const unsigned int chunk = (static_cast<unsigned char>(bytes[i]) << 16) |
                               (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += alphabet[(chunk >> 18) & 0x3f];
    out += alphabet[(chunk >> 12) & 0x3f];
    out += alphabet[(chunk >> 6) & 0x3f];
    out += '=';
  }
  return out;
}

std::string image_file_to_data_url(const std::filesystem::path& path) {
  const std::string ext = casefold(path.extension().string());
  std::string mime = "application/octet-stream";
  if (ext == ".png") mime = "image/png";
  else if (ext == ".jpg" || ext == ".jpeg") mime = "image/jpeg";
  else if (ext == ".webp") mime = "image/webp";
  return "data:" + mime + ";base64," + base64_encode(read_text_file(path));
}

HttpChatTransport::HttpChatTransport(GenConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint_url.empty()) {
    throw Error(ErrorKind::InvalidArgument, "endpoint URL must be nonempty");
  }
}

HttpChatTransport::PostResult HttpChatTransport::post_once(const std::string& request_body) {
  httplib::Client client(cfg_.endpoint_url);
  const auto seconds = static_cast<time_t>(cfg_.timeout_seconds);
  const auto micros = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  }
  auto result = client.Post("/v1/chat/completions", headers, request_body,
                            "application/json");
  PostResult out;
  if (!result) return out;
  out.transport_ok = true;
  out.status = result->status;
  out.body = result->body;
  return out;
}

void HttpChatTransport::backoff_sleep(std::chrono::milliseconds delay) {
  std::this_thread::sleep_for(delay);
}

std::string HttpChatTransport::complete(const std::string& prompt,
                                        const std::optional<std::string>& image_data_url) {
  const std::string body = dump_json(build_chat_request(cfg_, prompt, image_data_url));
  std::string last_failure = "no request sent";
  for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      backoff_sleep(std::chrono::milliseconds(250) * (1u << (attempt - 1)));
    }
    ++requests_;
    const PostResult result = post_once(body);
    if (result.transport_ok && result.status == 200) {
      return parse_chat_content(result.body);
    }
    if (result.transport_ok && result.status != 429 && result.status < 500) {
      throw Error(ErrorKind::HttpError, "endpoint returned status " +
                                            std::to_string(result.status) + ": " +
                                            result.body);
    }
    last_failure = result.transport_ok
                       ? "status " + std::to_string(result.status)
                       : "transport failure";
  }
  throw Error(ErrorKind::HttpError,
              "request failed after " + std::to_string(cfg_.max_retries + 1) +
                  " attempts (" + last_failure + ")");
}

ScriptedChatTransport ScriptedChatTransport::from_file(const std::filesystem::path& path) {
  const nlohmann::json j = read_json_file(path);
  if (!j.is_array()) {
    throw Error(ErrorKind::ParseError, "mock script must be a JSON array of strings");
  }
  std::vector<std::string> responses;
  for (const auto& item : j) {
    if (!item.is_string()) {
      throw Error(ErrorKind::ParseError, "mock script entries must be strings");
    }
    responses.push_back(item.get<std::string>());
  }
  return ScriptedChatTransport(std::move(responses));
}

std::string ScriptedChatTransport::complete(const std::string&,
                                            const std::optional<std::string>&) {
  ++requests_;
  if (next_ >= responses_.size()) return "";
  return responses_[next_++];
}

namespace {

struct Phase {
  PromptMode mode;
  ConceptSource source;
  std::size_t target;
  bool attach_image;
};

}  // namespace

GenResult generate_bank(const GenConfig& cfg, const std::string& class_name,
                        ChatTransport& transport,
                        const std::optional<std::filesystem::path>& image_path) {
  if (cfg.llm_target_count < 1 || cfg.vlm_target_count < 1 || cfg.batch_size < 1) {
    throw Error(ErrorKind::InvalidArgument, "generation targets must be at least 1");
  }
  std::optional<std::string> image_data_url;
  if (image_path) image_data_url = image_file_to_data_url(*image_path);

  GenResult result;
  std::unordered_set<std::string> seen;
  std::vector<std::string> existing;
  const std::string folded_class = casefold(class_name);

  const Phase phases[] = {
      {PromptMode::kLlm, ConceptSource::kLlm, cfg.llm_target_count, false},
      {PromptMode::kVlm, ConceptSource::kVlm, cfg.vlm_target_count, true},
  };
  for (const Phase& phase : phases) {
    std::size_t accepted = 0;
    std::size_t empty_rounds = 0;
    const std::size_t round_cap = phase.target + kStallLimit;
    for (std::size_t round = 0; round < round_cap && accepted < phase.target; ++round) {
      const std::string prompt = render_prompt(class_name, existing, phase.mode);
      std::string content;
      try {
        content = transport.complete(
            prompt, phase.attach_image ? image_data_url : std::nullopt);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::ParseError) throw;
        result.notes.push_back(std::string("skipped unparseable response: ") + err.what());
        content.clear();
      }

      std::size_t added = 0;
      for (const std::string& phrase : parse_bullet_lines(content)) {
        const std::string folded = casefold(phrase);
        if (!seen.insert(folded).second) continue;
        if (folded.find(folded_class) != std::string::npos) {
          result.notes.push_back("dropped class-name concept: " + phrase);
          continue;
        }
        if (word_count(phrase) > 5) {
          result.notes.push_back("dropped over-long concept: " + phrase);
          continue;
        }
        result.concepts.push_back({phrase, phase.source});
        existing.push_back(phrase);
        ++added;
        ++accepted;
        if (accepted >= phase.target) break;
      }
      if (added == 0) {
        if (++empty_rounds >= kStallLimit) {
          result.stalled = true;
          result.notes.push_back("generation stalled after " +
                                 std::to_string(kStallLimit) + " empty rounds");
          break;
        }
      } else {
        empty_rounds = 0;
      }
    }
  }
  return result;
}

ConceptBank attach_embeddings(const std::vector<GeneratedConcept>& concepts,
                              const FeatureMatrix& embeddings,
                              const std::string& class_label,
                              const std::optional<std::string>& sample_id) {
  if (embeddings.rows != concepts.size()) {
    throw Error(ErrorKind::CountMismatch,
                std::to_string(embeddings.rows) + " embedding rows for " +
                    std::to_string(concepts.size()) + " texts");
  }
  ConceptBank bank;
  bank.class_label = class_label;
  bank.sample_id = sample_id;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    ConceptEntry entry;
    entry.text = concepts[i].text;
    entry.source = concepts[i].source;
    try {
      entry.embedding = normalize(embeddings.row(i));
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::ZeroNorm) throw;
      throw Error(ErrorKind::ZeroNorm, "embedding row " + std::to_string(i) + " for \"" +
                                           concepts[i].text + "\" has near-zero norm");
    }
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

ConceptBank attach_embeddings(const std::vector<GeneratedConcept>& concepts,
                              const std::filesystem::path& embedding_file,
                              const std::string& class_label,
                              const std::optional<std::string>& sample_id) {
  return attach_embeddings(concepts, read_features(embedding_file), class_label,
                           sample_id);
}

}  // namespace faithtrace
