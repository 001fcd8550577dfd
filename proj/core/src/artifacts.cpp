#include "mfnn/artifacts.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mfnn {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string CsvTable::render() const {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ",";
    out += header[i];
  }
  out += "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += format_double(row[i]);
    }
    out += "\n";
  }
  return out;
}

std::string resolve_output_dir(const std::string& configured) {
  const char* env = std::getenv("MFNN_OUTPUT_DIR");
  const std::string dir = (env && *env) ? env : configured;
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_artifact(const std::string& dir, const std::string& stem, const std::string& ext,
                           const std::string& contents) {
  const std::filesystem::path path = std::filesystem::path(dir) / (stem + "." + ext);
  if (!std::filesystem::exists(path)) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write artifact " + path.string());
    out << contents;
  }
  return path.string();
}

}  // namespace mfnn
