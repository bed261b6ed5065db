#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uballoc/cli.hpp"
#include "uballoc/common.hpp"

using namespace uballoc;
namespace fs = std::filesystem;

namespace {

// Runs the installed binary inside a scratch directory, capturing exit code
// and both streams. Each invocation gets fresh capture files.
struct CliRunner {
  std::string bin;
  fs::path dir;
  int counter = 0;

  CliRunner() {
    const char* env = std::getenv("UBALLOC_BIN");
    REQUIRE_MESSAGE(env != nullptr,
                    "UBALLOC_BIN must point at the command-line binary");
    bin = env;
    dir = fs::temp_directory_path() /
          ("uballoc_cli_test_" + std::to_string(getpid()));
    fs::create_directories(dir);
  }

  int run(const std::string& args, std::string* out = nullptr,
          std::string* err = nullptr) {
    const fs::path out_path = dir / ("stdout_" + std::to_string(counter));
    const fs::path err_path = dir / ("stderr_" + std::to_string(counter));
    ++counter;
    const std::string cmd = "cd '" + dir.string() + "' && '" + bin + "' " +
                            args + " > '" + out_path.string() + "' 2> '" +
                            err_path.string() + "'";
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    if (out != nullptr) *out = cli::read_file(out_path.string());
    if (err != nullptr) *err = cli::read_file(err_path.string());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  std::string slurp(const std::string& rel) {
    return cli::read_file((dir / rel).string());
  }

  bool exists(const std::string& rel) { return fs::exists(dir / rel); }
};

CliRunner& runner() {
  static CliRunner r;
  return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& bytes) {
  // Good enough for our own unquoted output cells.
  std::vector<std::vector<std::string>> rows;
  std::string::size_type pos = 0;
  while (pos < bytes.size()) {
    auto end = bytes.find("\r\n", pos);
    if (end == std::string::npos) end = bytes.size();
    const std::string line = bytes.substr(pos, end - pos);
    pos = end + 2;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string::size_type c = 0;
    for (;;) {
      const auto comma = line.find(',', c);
      cells.push_back(line.substr(c, comma - c));
      if (comma == std::string::npos) break;
      c = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double csv_cell(const std::vector<std::vector<std::string>>& rows,
                const std::string& c0, const std::string& c1, int value_col) {
  for (const auto& r : rows) {
    if (r.size() > static_cast<std::size_t>(value_col) && r[0] == c0 &&
        r[1] == c1) {
      return std::stod(r[value_col]);
    }
  }
  FAIL("row not found: " << c0 << "," << c1);
  return 0.0;
}

const std::string kWorkedConfig =
    "# tie-breaking paradox, worked four-step example\n"
    "kind = paradox\n"
    "m = 4\n"
    "n = 3\n"
    "d = 2\n"
    "r = 1\n"
    "seed = 3\n"
    "i = 1\n"
    "j = 0\n"
    "b = 1,1,1\n"
    "option_script = 0,2,0,2,1,2,1,2\n"
    "tie_script_ei = 2\n"
    "tie_script_ej = 1\n";

}  // namespace

TEST_CASE("fmt_double uses nine significant digits") {
  CHECK(cli::fmt_double(0.5) == "0.5");
  CHECK(cli::fmt_double(1.0 / 3.0) == "0.333333333");
  CHECK(cli::fmt_double(25000.0) == "25000");
  CHECK(cli::fmt_double(1e-7) == "1e-07");
  CHECK(cli::fmt_double(123456789012.0) == "1.23456789e+11");
  CHECK(cli::fmt_double(0.0) == "0");
}

TEST_CASE("csv quoting follows RFC 4180") {
  CHECK(cli::csv_escape("plain") == "plain");
  CHECK(cli::csv_escape("a,b") == "\"a,b\"");
  CHECK(cli::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  cli::CsvBuilder b;
  b.row({"a,b", "c\"d", "plain"});
  b.row({"1", "2", "3"});
  CHECK(b.bytes() == "\"a,b\",\"c\"\"d\",plain\r\n1,2,3\r\n");
}

TEST_CASE("fnv1a64 matches the reference constants") {
  CHECK(cli::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(cli::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(cli::fnv1a64("hello") == 0xa430d84680aabd0bull);
  CHECK(cli::fnv1a64_hex("hello") == "a430d84680aabd0b");
  CHECK(cli::fnv1a64("load,count\r\n") == 0x3af071e1da86e821ull);
}

TEST_CASE("config grammar: worked example parses fully") {
  ExperimentConfig cfg = cli::parse_experiment_config(kWorkedConfig);
  CHECK(cfg.kind == ExperimentKind::Paradox);
  CHECK(cfg.m == 4);
  CHECK(cfg.n == 3);
  CHECK(cfg.d == 2);
  CHECK(cfg.replications == 1);
  CHECK(cfg.track_i == 1);
  CHECK(cfg.track_j == 0);
  CHECK(cfg.base_loads == std::vector<std::uint64_t>{1, 1, 1});
  REQUIRE(cfg.option_script.size() == 4);
  CHECK(cfg.option_script[0] == OptionSet{0, 2});
  CHECK(cfg.option_script[2] == OptionSet{1, 2});
  CHECK(cfg.scripted_ties);
  CHECK(cfg.tie_script_ei.winners == std::vector<std::uint32_t>{2});
  CHECK(cfg.tie_script_ej.winners == std::vector<std::uint32_t>{1});

  // the canonical echo names every consulted field
  auto echo = cli::resolved_config(cfg);
  bool saw_script = false;
  for (const auto& [k, v] : echo) {
    if (k == "option_script") {
      CHECK(v == "0,2,0,2,1,2,1,2");
      saw_script = true;
    }
  }
  CHECK(saw_script);
}

TEST_CASE("config grammar: errors name the key and line") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    try {
      cli::parse_experiment_config(text);
      FAIL_CHECK("expected a config error containing '" << needle << "'");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  fails_with("kind = histogram\npolcy = greedy\nm = 1\nn = 1\n", "polcy");
  fails_with("kind = histogram\npolcy = greedy\n", "line 2");
  fails_with("kind = histogram\nm = 5\nm = 6\nn = 1\n", "duplicate key 'm'");
  fails_with("m = 5\nn = 1\n", "kind");
  fails_with("kind = histogram\nm = -3\nn = 1\n", "non-negative");
  fails_with("kind = histogram\nm = 1\nn = 1\nseed = banana\n", "banana");
  fails_with(
      "kind = paradox\nm = 2\nn = 4\nd = 2\noption_script = 0,1,2\n",
      "multiple of d");
  fails_with("kind = histogram\nm = 1\nn = 1\nd =\n", "empty value");
}

TEST_CASE("report serialization is deterministic at the byte level") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Couple;
  cfg.m = 200;
  cfg.n = 30;
  cfg.d = 2;
  cfg.replications = 8;
  cfg.seed = 41;
  const EstimateReport a = run_experiment(cfg, 1);
  const EstimateReport b = run_experiment(cfg, 2);
  CHECK(cli::report_json(a) == cli::report_json(b));
  CHECK(cli::observations_csv(a) == cli::observations_csv(b));

  const std::string csv = cli::observations_csv(a);
  CHECK(csv.rfind("rep,seed,dominance,", 0) == 0);

  const nlohmann::json j = nlohmann::json::parse(cli::report_json(a));
  CHECK(j["kind"] == "couple");
  CHECK(j["replications"] == 8);
  CHECK(j["stats"][0]["name"] == "dominance");
}

TEST_CASE("binary: simulate writes a histogram and is reproducible") {
  CliRunner& r = runner();
  std::string out;
  int code = r.run(
      "simulate --policy greedy --m 10 --n 1 --d 3 --seed 1 --out one.csv",
      &out);
  CHECK(code == 0);
  CHECK(out.find("max_load=10") != std::string::npos);
  CHECK(out.find("empty_bins=0") != std::string::npos);
  const std::string hist = r.slurp("one.csv");
  CHECK(hist.rfind("load,count\r\n", 0) == 0);
  CHECK(hist.find("10,1\r\n") != std::string::npos);

  code = r.run(
      "simulate --policy greedy --m 10 --n 1 --d 3 --seed 1 --out two.csv");
  CHECK(code == 0);
  CHECK(r.slurp("two.csv") == hist);
}

TEST_CASE("binary: simulate warns when uniform ignores d") {
  CliRunner& r = runner();
  std::string err;
  const int code = r.run(
      "simulate --policy uniform --m 5 --n 4 --d 3 --seed 2 --out u.csv",
      nullptr, &err);
  CHECK(code == 0);
  CHECK(err.find("ignored") != std::string::npos);
}

TEST_CASE("binary: simulate snapshots and trace") {
  CliRunner& r = runner();
  const int code = r.run(
      "simulate --policy greedy --m 10 --n 4 --seed 5 --snapshots 5,10 "
      "--trace trace.csv --out snap.csv --manifest snap_manifest.json");
  CHECK(code == 0);
  CHECK(r.exists("snap_t5.csv"));
  CHECK(r.exists("snap_t10.csv"));
  const std::string trace = r.slurp("trace.csv");
  CHECK(trace.rfind("t,chosen,tie_occurred,tie_cardinality,options\r\n", 0) ==
        0);
  CHECK(parse_csv(trace).size() == 11);  // header + one row per ball

  // snapshot boundaries out of order are refused
  std::string err;
  const int bad = r.run(
      "simulate --policy greedy --m 10 --n 4 --seed 5 --snapshots 7,3 "
      "--out bad.csv",
      nullptr, &err);
  CHECK(bad == 1);
}

TEST_CASE("binary: fluid table and self-check") {
  CliRunner& r = runner();
  std::string out;
  int code = r.run("fluid --d 2 --c-end 1 --out fluid.csv --check", &out);
  CHECK(code == 0);
  const auto rows = parse_csv(r.slurp("fluid.csv"));
  REQUIRE(rows.size() >= 3);
  CHECK(rows[0][0] == "c");
  CHECK(rows[0][1] == "z0");
  CHECK(rows[0].back() == "z0_closed");
  const auto& last = rows.back();
  CHECK(std::stod(last[0]) == doctest::Approx(1.0));
  CHECK(std::stod(last[1]) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::stod(last.back()) == doctest::Approx(0.5).epsilon(1e-9));

  // zero horizon: exactly the initial row
  code = r.run("fluid --d 2 --c-end 0 --out fluid0.csv");
  CHECK(code == 0);
  const auto rows0 = parse_csv(r.slurp("fluid0.csv"));
  REQUIRE(rows0.size() == 2);
  CHECK(std::stod(rows0[1][1]) == 1.0);

  // an impossible tolerance trips the check exit code
  std::string err;
  code = r.run("fluid --d 2 --c-end 1 --check --check-tol 1e-20", nullptr,
               &err);
  CHECK(code == 3);

  // a wild step size is a numerical failure
  code = r.run("fluid --d 2 --c-end 3 --h 3 --kmax 10 --out wild.csv");
  CHECK(code == 2);
}

TEST_CASE("binary: bound subcommands") {
  CliRunner& r = runner();
  std::string out;

  int code = r.run("bound swap --delta 4.60517018598809136804", &out);
  CHECK(code == 0);
  CHECK(std::stod(out) == doctest::Approx(0.01).epsilon(1e-9));

  code = r.run("bound maxload --c 1 --d 2 --n 1000000 --eps 0.1", &out);
  CHECK(code == 0);
  // printed with nine significant digits
  CHECK(std::stod(out) == doctest::Approx(15.011849649644).epsilon(1e-8));

  code = r.run("bound subset-upper --x 1 --d 3 --m 500", &out);
  CHECK(code == 0);
  CHECK(std::stod(out) == doctest::Approx(500.0));

  code = r.run("bound paradox --t 100 --n 1000 --d 2", &out);
  CHECK(code == 0);
  CHECK(std::stod(out) == doctest::Approx(0.016 * std::exp(0.4)).epsilon(1e-9));
  auto detail = nlohmann::json::parse(out.substr(out.find('{')));
  CHECK(detail["exponent"].get<double>() ==
        doctest::Approx(4.0 * 100.0 / (1000.0 * std::log(1000.0)) - 1.0));

  // the asymptotic parameterization honestly fails its precondition at
  // desk scale (j = 0 keeps the product evaluable)
  code = r.run(
      "bound equal-load --asymptotic --delta 0.1 --n 10000 "
      "--m 1000000000000 --d 2 --j 0",
      &out);
  CHECK(code == 0);
  detail = nlohmann::json::parse(out.substr(out.find('{')));
  CHECK_FALSE(detail["precondition"]["satisfied"].get<bool>());
  CHECK(detail["precondition"]["lhs"].get<double>() ==
        doctest::Approx(-9.70618e6).epsilon(1e-4));

  // at j = 1 the antichain budget is negative there: numerical failure
  code = r.run(
      "bound equal-load --asymptotic --delta 0.1 --n 10000 "
      "--m 1000000000000 --d 2 --j 1");
  CHECK(code == 2);
}

TEST_CASE("binary: experiment end to end with digests") {
  CliRunner& r = runner();
  cli::write_file((r.dir / "couple.cfg").string(),
                  "kind = couple\nm = 1000\nn = 100\nd = 2\nr = 20\nseed = "
                  "11\n");
  std::string out;
  int code = r.run("experiment --config couple.cfg --outdir cpl --threads 1",
                   &out);
  CHECK(code == 0);

  const std::string report = r.slurp("cpl/report.json");
  const nlohmann::json j = nlohmann::json::parse(report);
  CHECK(j["kind"] == "couple");
  CHECK(j["replications"] == 20);
  bool found = false;
  for (const auto& e : j["extras"]) {
    if (e["name"] == "dominance_failures") {
      CHECK(e["value"].get<double>() == 0.0);
      found = true;
    }
  }
  CHECK(found);

  // manifest digests must match the files on disk
  const nlohmann::json manifest =
      nlohmann::json::parse(r.slurp("cpl/manifest.json"));
  int verified = 0;
  for (const auto& rec : manifest["outputs"]) {
    const std::string bytes =
        r.slurp("cpl/" + rec["path"].get<std::string>());
    CHECK(cli::fnv1a64_hex(bytes) == rec["fnv1a64"].get<std::string>());
    CHECK(bytes.size() == rec["bytes"].get<std::uint64_t>());
    ++verified;
  }
  CHECK(verified >= 2);  // report + observations

  // reruns and thread counts never change data bytes
  code = r.run("experiment --config couple.cfg --outdir cpl2 --threads 4");
  CHECK(code == 0);
  CHECK(r.slurp("cpl2/report.json") == report);
  CHECK(r.slurp("cpl2/observations.csv") == r.slurp("cpl/observations.csv"));
}

TEST_CASE("binary: scripted paradox experiment reproduces the example") {
  CliRunner& r = runner();
  cli::write_file((r.dir / "paradox.cfg").string(), kWorkedConfig);
  std::string out;
  const int code =
      r.run("experiment --config paradox.cfg --outdir pdx", &out);
  CHECK(code == 0);
  const nlohmann::json j =
      nlohmann::json::parse(r.slurp("pdx/report.json"));
  CHECK(j["final_loads_ei"] == nlohmann::json({1, 2, 5}));
  CHECK(j["final_loads_ej"] == nlohmann::json({4, 3, 1}));
  CHECK(j["stats"][0]["name"] == "paradox");
  CHECK(j["stats"][0]["mean"].get<double>() == 1.0);
}

TEST_CASE("binary: bad experiment config exits 1 naming the key") {
  CliRunner& r = runner();
  cli::write_file((r.dir / "bad.cfg").string(),
                  "kind = couple\npolcy = greedy\nm = 10\nn = 5\n");
  std::string err;
  const int code =
      r.run("experiment --config bad.cfg --outdir nowhere", nullptr, &err);
  CHECK(code == 1);
  CHECK(err.find("polcy") != std::string::npos);
}

TEST_CASE("binary: reference tables") {
  CliRunner& r = runner();
  std::string out;
  int code = r.run("table --which 3.1 --out t31.csv", &out);
  CHECK(code == 0);
  const auto t31 = parse_csv(r.slurp("t31.csv"));
  CHECK(csv_cell(t31, "greedy", "2", 2) == doctest::Approx(0.5));
  CHECK(csv_cell(t31, "greedy", "3", 2) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-9));
  CHECK(csv_cell(t31, "uniform", "5", 2) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(csv_cell(t31, "fair", "2", 2) == doctest::Approx(0.2384));
  CHECK(csv_cell(t31, "fair", "3", 2) == doctest::Approx(0.1770));

  code = r.run("table --which 4.1 --out t41.csv", &out);
  CHECK(code == 0);
  CHECK(out.find(">=0.57") != std::string::npos);
  CHECK(out.find(">=0.90") != std::string::npos);
  const auto t41 = parse_csv(r.slurp("t41.csv"));
  const std::string third = cli::fmt_double(1.0 / 3.0);
  CHECK(csv_cell(t41, third, "uniform", 2) ==
        doctest::Approx(0.701212774505).epsilon(1e-9));
  CHECK(csv_cell(t41, "0.5", "uniform", 2) ==
        doctest::Approx(0.801819161757).epsilon(1e-9));
  CHECK(csv_cell(t41, cli::fmt_double(2.0 / 3.0), "uniform", 2) ==
        doctest::Approx(0.885152495090).epsilon(1e-9));
  CHECK(csv_cell(t41, "0.5", "d=2", 2) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(csv_cell(t41, third, "d=4", 2) ==
        doctest::Approx(std::pow(1.0 / 3.0, 0.25)).epsilon(1e-9));

  code = r.run("table --which 9.9 --out no.csv");
  CHECK(code == 1);
}

TEST_CASE("binary: exit codes") {
  CliRunner& r = runner();
  CHECK(r.run("--help") == 0);
  CHECK(r.run("") == 1);                      // a subcommand is required
  CHECK(r.run("simulate --bogus-flag 1") == 1);
  CHECK(r.run("simulate --policy greedy --m 1 --seed 0") == 1);  // missing --n
  CHECK(r.run("simulate --policy greedy --m 1 --n 0 --seed 0") == 1);
  // beyond the supported bin count: a capacity failure, not a usage error
  CHECK(r.run("simulate --policy uniform --m 1 --n 100000001 --seed 0 "
              "--out cap.csv") == 2);
}
