#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithtrace/error.hpp"
#include "faithtrace/numkernel.hpp"

namespace faithtrace {

// One formatting rule for every floating value we emit: 17 significant
// digits, which round-trips any double exactly and diffs cleanly.
std::string format_double(double value);

// Serializes like nlohmann's dump() but floats go through format_double.
// indent < 0 means compact single-line output (used for JSON lines).
std::string dump_json(const nlohmann::json& j, int indent = -1);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j,
                     int indent = 2);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

nlohmann::json vector_to_json(const FeatureVector& v);
FeatureVector vector_from_json(const nlohmann::json& j, const std::string& context);

}  // namespace faithtrace
