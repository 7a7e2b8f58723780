#include "faithtrace/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace faithtrace {

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::NonFinite, "refusing to serialize non-finite value");
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

void dump_impl(const nlohmann::json& j, int indent, int depth, std::string& out) {
  const bool pretty = indent >= 0;
  const auto pad = [&](int level) {
    if (pretty) {
      out.append(static_cast<std::size_t>(indent) * static_cast<std::size_t>(level), ' ');
    }
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        if (pretty) out += '\n';
        pad(depth + 1);
        out += nlohmann::json(it.key()).dump();
        out += pretty ? ": " : ":";
        dump_impl(it.value(), indent, depth + 1, out);
      }
      if (pretty) out += '\n';
      pad(depth);
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& item : j) {
        if (!first) out += ',';
        first = false;
        if (pretty) out += '\n';
        pad(depth + 1);
        dump_impl(item, indent, depth + 1, out);
      }
      if (pretty) out += '\n';
      pad(depth);
      out += ']';
      return;
    }
    case nlohmann::json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      // strings, integers, booleans, null: nlohmann's own formatting is exact
      out += j.dump();
      return;
  }
}

}  // namespace

std::string dump_json(const nlohmann::json& j, int indent) {
  std::string out;
  dump_impl(j, indent, 0, out);
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorKind::ParseError, "invalid JSON in " + path.string());
  }
  return j;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j,
                     int indent) {
  write_text_file(path, dump_json(j, indent) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw Error(ErrorKind::IoError, "short write to " + path.string());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

nlohmann::json vector_to_json(const FeatureVector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

FeatureVector vector_from_json(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array()) {
    throw Error(ErrorKind::ParseError, context + " must be a JSON array");
  }
  FeatureVector out;
  out.reserve(j.size());
  for (const auto& item : j) {
    if (!item.is_number()) {
      throw Error(ErrorKind::ParseError, context + " contains a non-numeric entry");
    }
    out.push_back(item.get<double>());
  }
  require_finite(out, context);
  return out;
}

}  // namespace faithtrace
