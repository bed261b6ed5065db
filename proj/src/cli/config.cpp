#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uballoc/cli.hpp"
#include "uballoc/common.hpp"

namespace uballoc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

std::uint64_t parse_u64(const std::string& v, std::size_t line,
                        const std::string& key) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return r;
  } catch (const std::exception&) {
    fail(line, "key '" + key + "' needs a non-negative integer, got '" + v +
                   "'");
  }
}

double parse_real(const std::string& v, std::size_t line,
                  const std::string& key) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return r;
  } catch (const std::exception&) {
    fail(line, "key '" + key + "' needs a number, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> items;
  std::string cur;
  std::stringstream ss(v);
  while (std::getline(ss, cur, ',')) items.push_back(trim(cur));
  return items;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  bool have_kind = false;

  std::vector<std::uint64_t> flat_option_script;
  bool have_option_script = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;

    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(line_no, "expected key=value, got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (value.empty()) fail(line_no, "key '" + key + "' has an empty value");
    if (!seen.insert(key).second) fail(line_no, "duplicate key '" + key + "'");

    if (key == "kind") {
      have_kind = true;
      if (value == "couple") {
        cfg.kind = ExperimentKind::Couple;
      } else if (value == "paradox") {
        cfg.kind = ExperimentKind::Paradox;
      } else if (value == "gambler") {
        cfg.kind = ExperimentKind::Gambler;
      } else if (value == "equal_loads") {
        cfg.kind = ExperimentKind::EqualLoads;
      } else if (value == "histogram") {
        cfg.kind = ExperimentKind::Histogram;
      } else if (value == "subset_load") {
        cfg.kind = ExperimentKind::SubsetLoad;
      } else {
        fail(line_no, "unknown kind '" + value + "'");
      }
    } else if (key == "policy") {
      if (value == "uniform") {
        cfg.policy = PolicyKind::Uniform;
      } else if (value == "fair") {
        cfg.policy = PolicyKind::Fair;
      } else if (value == "greedy") {
        cfg.policy = PolicyKind::Greedy;
      } else {
        fail(line_no, "unknown policy '" + value + "'");
      }
    } else if (key == "tie_weighting") {
      if (value == "distinct") {
        cfg.tie_weighting = TieWeighting::DistinctUniform;
      } else if (value == "multiset") {
        cfg.tie_weighting = TieWeighting::MultisetWeighted;
      } else {
        fail(line_no, "unknown tie_weighting '" + value + "'");
      }
    } else if (key == "m") {
      cfg.m = parse_u64(value, line_no, key);
    } else if (key == "n") {
      cfg.n = parse_u64(value, line_no, key);
    } else if (key == "d") {
      const std::uint64_t d = parse_u64(value, line_no, key);
      if (d == 0 || d > 0xFFFFFFFFull) fail(line_no, "d out of range");
      cfg.d = static_cast<std::uint32_t>(d);
    } else if (key == "r") {
      cfg.replications = parse_u64(value, line_no, key);
    } else if (key == "seed") {
      cfg.seed = parse_u64(value, line_no, key);
    } else if (key == "x") {
      for (const std::string& item : split_list(value)) {
        cfg.x.push_back(parse_real(item, line_no, key));
      }
    } else if (key == "y") {
      for (const std::string& item : split_list(value)) {
        cfg.y.push_back(parse_real(item, line_no, key));
      }
    } else if (key == "delta") {
      cfg.delta = parse_real(value, line_no, key);
    } else if (key == "gap") {
      const std::uint64_t g = parse_u64(value, line_no, key);
      cfg.gap = static_cast<std::int64_t>(g);
    } else if (key == "snapshots") {
      for (const std::string& item : split_list(value)) {
        cfg.snapshots.push_back(parse_u64(item, line_no, key));
      }
    } else if (key == "i") {
      cfg.track_i = static_cast<std::uint32_t>(parse_u64(value, line_no, key));
    } else if (key == "j") {
      cfg.track_j = static_cast<std::uint32_t>(parse_u64(value, line_no, key));
    } else if (key == "b") {
      for (const std::string& item : split_list(value)) {
        cfg.base_loads.push_back(parse_u64(item, line_no, key));
      }
    } else if (key == "option_script") {
      have_option_script = true;
      for (const std::string& item : split_list(value)) {
        flat_option_script.push_back(parse_u64(item, line_no, key));
      }
    } else if (key == "tie_script_ei") {
      cfg.scripted_ties = true;
      for (const std::string& item : split_list(value)) {
        cfg.tie_script_ei.winners.push_back(
            static_cast<std::uint32_t>(parse_u64(item, line_no, key)));
      }
    } else if (key == "tie_script_ej") {
      cfg.scripted_ties = true;
      for (const std::string& item : split_list(value)) {
        cfg.tie_script_ej.winners.push_back(
            static_cast<std::uint32_t>(parse_u64(item, line_no, key)));
      }
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }

  if (!have_kind) throw ConfigError("config is missing the 'kind' key");

  if (have_option_script) {
    if (cfg.d == 0 || flat_option_script.size() % cfg.d != 0) {
      throw ConfigError(
          "option_script length must be a multiple of d (one set per step)");
    }
    for (std::size_t p = 0; p < flat_option_script.size(); p += cfg.d) {
      OptionSet s;
      for (std::uint32_t k = 0; k < cfg.d; ++k) {
        const std::uint64_t b = flat_option_script[p + k];
        if (b > 0xFFFFFFFFull) {
          throw ConfigError("option_script references a bin out of range");
        }
        s.push_back(static_cast<std::uint32_t>(b));
      }
      cfg.option_script.push_back(std::move(s));
    }
  }

  validate(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_file(path));
}

std::vector<std::pair<std::string, std::string>> resolved_config(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  auto put = [&](const char* k, std::string v) {
    out.emplace_back(k, std::move(v));
  };
  auto join_u64 = [](const std::vector<std::uint64_t>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) s += ',';
      s += std::to_string(v[k]);
    }
    return s;
  };
  auto join_real = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) s += ',';
      s += fmt_double(v[k]);
    }
    return s;
  };

  put("kind", experiment_kind_name(cfg.kind));
  const bool uses_policy = cfg.kind == ExperimentKind::Histogram ||
                           cfg.kind == ExperimentKind::SubsetLoad ||
                           cfg.kind == ExperimentKind::EqualLoads;
  if (uses_policy) {
    put("policy", cfg.policy == PolicyKind::Uniform ? "uniform"
                  : cfg.policy == PolicyKind::Fair  ? "fair"
                                                    : "greedy");
  }
  put("m", std::to_string(cfg.m));
  put("n", std::to_string(cfg.n));
  put("d", std::to_string(cfg.d));
  put("r", std::to_string(cfg.replications));
  put("seed", std::to_string(cfg.seed));
  put("tie_weighting", cfg.tie_weighting == TieWeighting::DistinctUniform
                           ? "distinct"
                           : "multiset");
  switch (cfg.kind) {
    case ExperimentKind::SubsetLoad:
      if (!cfg.x.empty()) put("x", join_real(cfg.x));
      if (!cfg.y.empty()) put("y", join_real(cfg.y));
      break;
    case ExperimentKind::EqualLoads:
      put("delta", fmt_double(cfg.delta));
      break;
    case ExperimentKind::Gambler:
      if (cfg.gap >= 0) put("gap", std::to_string(cfg.gap));
      if (cfg.delta >= 0.0) put("delta", fmt_double(cfg.delta));
      break;
    case ExperimentKind::Histogram:
      if (!cfg.snapshots.empty()) put("snapshots", join_u64(cfg.snapshots));
      break;
    case ExperimentKind::Paradox: {
      put("i", std::to_string(cfg.track_i));
      put("j", std::to_string(cfg.track_j));
      if (!cfg.base_loads.empty()) put("b", join_u64(cfg.base_loads));
      if (!cfg.option_script.empty()) {
        std::string s;
        for (const OptionSet& set : cfg.option_script) {
          for (std::uint32_t b : set) {
            if (!s.empty()) s += ',';
            s += std::to_string(b);
          }
        }
        put("option_script", std::move(s));
      }
      if (cfg.scripted_ties) {
        std::vector<std::uint64_t> wa(cfg.tie_script_ei.winners.begin(),
                                      cfg.tie_script_ei.winners.end());
        std::vector<std::uint64_t> wb(cfg.tie_script_ej.winners.begin(),
                                      cfg.tie_script_ej.winners.end());
        put("tie_script_ei", join_u64(wa));
        put("tie_script_ej", join_u64(wb));
      }
      break;
    }
    case ExperimentKind::Couple:
      break;
  }
  return out;
}

}  // namespace uballoc::cli
