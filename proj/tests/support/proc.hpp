#pragma once

// Minimal subprocess helper for driving the CLI binary from tests.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace proc {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Runs `command` through /bin/sh, capturing stdout and stderr separately.
// Prepend environment assignments to the command when needed.
inline RunResult run(const std::string& command, const std::filesystem::path& scratch) {
  static int counter = 0;
  const std::filesystem::path out_file = scratch / ("stdout." + std::to_string(counter));
  const std::filesystem::path err_file = scratch / ("stderr." + std::to_string(counter));
  ++counter;

  const std::string full =
      command + " >" + out_file.string() + " 2>" + err_file.string();
  const int status = std::system(full.c_str());

  RunResult result;
  if (status >= 0 && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

// Fresh scratch directory under the system temp root.
inline std::filesystem::path make_scratch(const std::string& tag) {
  const auto base = std::filesystem::temp_directory_path() /
                    ("faithtrace_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

}  // namespace proc
