#pragma once

#include <string>
#include <vector>

namespace mfnn {

// Flat table with a header row; cells are rendered with round-trip precision.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string render() const;
};

std::string format_double(double v);

// Output directory for a run: the MFNN_OUTPUT_DIR environment variable when
// set, otherwise the configured directory. Created on demand.
std::string resolve_output_dir(const std::string& configured);

// Artifacts are append-only: <dir>/<stem>.<ext> is written only if absent
// (contents are deterministic, so an existing file is already correct).
// Returns the full path.
std::string write_artifact(const std::string& dir, const std::string& stem, const std::string& ext,
                           const std::string& contents);

}  // namespace mfnn
