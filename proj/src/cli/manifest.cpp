#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>

#include <json.hpp>

#include "uballoc/cli.hpp"
#include "uballoc/common.hpp"

namespace uballoc::cli {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string timestamp_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = {{"name", "uballoc"}, {"version", kVersion}};
  j["command"] = m.command;
  nlohmann::json cfg = nlohmann::json::array();
  for (const auto& [key, value] : m.config) {
    cfg.push_back({{"key", key}, {"value", value}});
  }
  j["config"] = std::move(cfg);
  j["base_seed"] = m.base_seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["wall_seconds"] = m.wall_seconds;
  j["schema"] = {{"report", 1}, {"observations", 1}, {"manifest", 1}};
  nlohmann::json outs = nlohmann::json::array();
  for (const OutputRecord& rec : m.outputs) {
    outs.push_back({{"path", rec.path},
                    {"bytes", rec.bytes},
                    {"fnv1a64", rec.digest}});
  }
  j["outputs"] = std::move(outs);
  return j.dump(2) + "\n";
}

std::string report_json(const EstimateReport& rep) {
  nlohmann::json j;
  j["kind"] = rep.kind;
  j["replications"] = rep.replications;
  j["base_seed"] = rep.base_seed;
  j["variance_defined"] = rep.variance_defined;
  nlohmann::json stats = nlohmann::json::array();
  for (const StatSummary& s : rep.stats) {
    stats.push_back({{"name", s.name},
                     {"mean", s.mean},
                     {"variance", s.variance},
                     {"ci_half", s.ci_half}});
  }
  j["stats"] = std::move(stats);
  nlohmann::json extras = nlohmann::json::array();
  for (const auto& [name, value] : rep.extras) {
    extras.push_back({{"name", name}, {"value", value}});
  }
  j["extras"] = std::move(extras);
  if (!rep.final_loads_ei.empty() || !rep.final_loads_ej.empty()) {
    j["final_loads_ei"] = rep.final_loads_ei;
    j["final_loads_ej"] = rep.final_loads_ej;
  }
  return j.dump(2) + "\n";
}

std::string observations_csv(const EstimateReport& rep) {
  CsvBuilder csv;
  std::vector<std::string> header{"rep", "seed"};
  for (const StatSummary& s : rep.stats) header.push_back(s.name);
  csv.row(header);
  for (std::uint64_t r = 0; r < rep.replications; ++r) {
    std::vector<std::string> row;
    row.reserve(rep.stats.size() + 2);
    row.push_back(std::to_string(r));
    row.push_back(std::to_string(rep.rep_seeds[r]));
    for (double v : rep.observations[r]) row.push_back(fmt_double(v));
    csv.row(row);
  }
  return csv.bytes();
}

}  // namespace uballoc::cli
