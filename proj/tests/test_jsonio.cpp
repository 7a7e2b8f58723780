#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <limits>

#include "faithtrace/jsonio.hpp"
#include "faithtrace/rng.hpp"
#include "support/proc.hpp"

using namespace faithtrace;

TEST_CASE("17-digit formatting round-trips any double") {
  Rng rng(2001);
  for (int trial = 0; trial < 2000; ++trial) {
    double value = rng.gaussian() * std::pow(10.0, static_cast<double>(rng.uniform_index(613)) - 306.0);
    if (!std::isfinite(value)) continue;
    const std::string text = format_double(value);
    CHECK(std::strtod(text.c_str(), nullptr) == value);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(-0.0) == "-0");
  CHECK(format_double(1.0) == "1");
  CHECK(std::strtod(format_double(0.1).c_str(), nullptr) == 0.1);
  CHECK_THROWS_AS(format_double(std::numeric_limits<double>::quiet_NaN()), Error);
  CHECK_THROWS_AS(format_double(std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("dump_json parses back to the same document") {
  nlohmann::json doc;
  doc["name"] = "line \"quoted\"\nnext";
  doc["count"] = 42;
  doc["ratio"] = 0.1;
  doc["flags"] = {true, false, nullptr};
  doc["nested"] = {{"empty_obj", nlohmann::json::object()},
                   {"empty_arr", nlohmann::json::array()},
                   {"values", {1.5, -2.0, 3e-300}}};

  for (int indent : {-1, 2}) {
    const nlohmann::json back = nlohmann::json::parse(dump_json(doc, indent));
    CHECK(back.at("name") == doc.at("name"));
    CHECK(back.at("count") == 42);
    CHECK(back.at("ratio").get<double>() == 0.1);
    CHECK(back.at("nested").at("values")[2].get<double>() == 3e-300);
    CHECK(back.at("nested").at("empty_obj").is_object());
    CHECK(back.at("nested").at("empty_arr").is_array());
  }
  CHECK(dump_json(nlohmann::json{{"b", 1}, {"a", 2}}) == "{\"a\":2,\"b\":1}");
}

TEST_CASE("json file helpers surface readable errors") {
  const auto dir = proc::make_scratch("jsonio");
  write_json_file(dir / "ok.json", nlohmann::json{{"x", 1.25}});
  CHECK(read_json_file(dir / "ok.json").at("x") == 1.25);

  write_text_file(dir / "broken.json", "{\"x\": ");
  try {
    read_json_file(dir / "broken.json");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
  try {
    read_json_file(dir / "missing.json");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}

TEST_CASE("vector json helpers validate shape and content") {
  const FeatureVector v = {1.0, -2.5, 3e10};
  CHECK(vector_from_json(vector_to_json(v), "test") == v);
  CHECK_THROWS_AS(vector_from_json(nlohmann::json{{"x", 1}}, "test"), Error);
  CHECK_THROWS_AS(vector_from_json(nlohmann::json::array({1.0, "two"}), "test"), Error);
}
