#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uballoc/experiments.hpp"

// Command-line front end pieces: the key=value experiment-config grammar,
// RFC-4180 CSV emission, run manifests with content digests, and the command
// implementations themselves. Data outputs are deterministic functions of
// (flags, seed); anything time-dependent lives only in the manifest.

namespace uballoc::cli {

// --------------------------------------------------------------------------
// Experiment config files: one `key=value` per line, `#` starts a comment,
// blank lines ignored, list values comma-separated. Unknown and duplicate
// keys are errors.

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical key=value echo of every field the config's kind consults.
std::vector<std::pair<std::string, std::string>> resolved_config(
    const ExperimentConfig& cfg);

// --------------------------------------------------------------------------
// CSV: RFC-4180 quoting, CRLF row endings, 9 significant digits for reals.

std::string fmt_double(double v);  // %.9g
std::string csv_escape(std::string_view field);

class CsvBuilder {
 public:
  void row(const std::vector<std::string>& fields);
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

// Whole-file write; throws std::runtime_error on failure.
void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

// --------------------------------------------------------------------------
// Run manifests.

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

struct OutputRecord {
  std::string path;     // as written, relative to the manifest's directory
  std::uint64_t bytes;  // size
  std::string digest;   // fnv1a64, hex
};

struct RunManifest {
  std::string command;  // subcommand name
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t base_seed = 0;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;
  double wall_seconds = 0.0;
  std::vector<OutputRecord> outputs;
};

std::string manifest_json(const RunManifest& m);
std::string timestamp_utc_now();

// Report serialization (canonical bytes: no timing fields).
std::string report_json(const EstimateReport& rep);
std::string observations_csv(const EstimateReport& rep);

// --------------------------------------------------------------------------
// Entry point. Exit codes: 0 ok, 1 usage/config error, 2 numerical or
// capacity failure, 3 failed --check.

int run_cli(int argc, char** argv);

}  // namespace uballoc::cli
