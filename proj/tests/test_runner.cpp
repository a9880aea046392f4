#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "evodpo/runner.hpp"
#include "json.hpp"

using namespace evodpo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(EVODPO_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_run(const fs::path& out) {
  RunConfig cfg = parse_config("H = 200\ndelta_min = 0.05\ndelta_max = 0.3\nV_T = 10\n");
  cfg.out = out.string();
  return cfg;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("reruns are byte-identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  RunConfig cfg = small_run(a);
  cfg.seeds = {2, 3};
  cfg.phase.delta_H = 0.3;
  const RunOutputs first = execute_run(cfg, Execution::kSerial);
  cfg.out = b.string();
  const RunOutputs second = execute_run(cfg, Execution::kParallel);
  REQUIRE(first.files.size() == second.files.size());
  for (std::size_t i = 0; i < first.files.size(); ++i) {
    CHECK(first.files[i].filename() == second.files[i].filename());
    CHECK(read_text(first.files[i]) == read_text(second.files[i]));
  }
  CHECK(fs::exists(a / "evodpo_seed2_ledger.csv"));
  CHECK(fs::exists(a / "evodpo_seed3_phases.csv"));
  CHECK(fs::exists(a / "evodpo_summary.json"));
}

TEST_CASE("five-seed summary") {
  const fs::path dir = scratch("five");
  RunConfig cfg = small_run(dir);
  cfg.phase.delta_H = 0.3;
  const RunOutputs out = execute_run(cfg, Execution::kParallel);
  const auto json = nlohmann::json::parse(read_text(dir / "evodpo_summary.json"));
  for (const char* key : {"mode", "seeds", "final_metric_per_seed", "mean", "sem",
                          "slope_exponent", "accept_rate"}) {
    CHECK(json.contains(key));
  }
  const auto finals = json["final_metric_per_seed"].get<std::vector<double>>();
  REQUIRE(finals.size() == 5);
  CHECK(json["seeds"].get<std::vector<std::uint64_t>>() == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  CHECK(json["mean"].get<double>() == mean(finals));
  CHECK(json["sem"].get<double>() == sem(finals));

  // Final regret matches the last ledger row; accept rate recounted from the phase CSVs.
  int accepted = 0, gated = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const std::string ledger = read_text(dir / ("evodpo_seed" + std::to_string(s) + "_ledger.csv"));
    CHECK(first_line(ledger) == kLedgerHeader);
    const auto rows = csv_rows(ledger);
    REQUIRE(rows.size() == 200);
    CHECK(std::stod(rows.back()[5]) == finals[s - 1]);

    const std::string phases = read_text(dir / ("evodpo_seed" + std::to_string(s) + "_phases.csv"));
    CHECK(first_line(phases) == kPhaseHeader);
    for (const auto& row : csv_rows(phases)) {
      if (std::stoi(row[1]) > 0) ++gated;
      if (row[4] == "1") ++accepted;
    }
  }
  REQUIRE(gated > 0);
  CHECK(json["accept_rate"].get<double>() == static_cast<double>(accepted) / gated);
  CHECK(out.summary.accept_rate.has_value());
}

TEST_CASE("other modes emit their files") {
  const fs::path dir = scratch("modes");
  RunConfig bandit = small_run(dir);
  bandit.mode = RunMode::kRewardBandit;
  bandit.seeds = {1, 2};
  const RunOutputs b = execute_run(bandit, Execution::kSerial);
  CHECK(b.summary.mode == "reward-bandit");
  for (double v : b.summary.final_metric_per_seed) CHECK(v <= 0.0);

  RunConfig atlas = small_run(dir);
  atlas.mode = RunMode::kAtlas;
  atlas.seeds = {1, 1};
  atlas.rounds = 40;
  atlas.episode_horizon = 60;
  atlas.episodes = 1;
  execute_run(atlas, Execution::kSerial);
  const std::string rounds = read_text(dir / "atlas_seed1_rounds.csv");
  CHECK(first_line(rounds) == kRoundHeader);
  CHECK(csv_rows(rounds).size() == 40);
  CHECK(first_line(read_text(dir / "atlas_seed1_phases.csv")) == kPhaseHeader);
}

TEST_CASE("verify mode writes parseable lemma reports") {
  const fs::path dir = scratch("verify");
  RunConfig cfg = parse_config(
      "mode = verify\nkl_trials = 50\ndrift_runs = 5\nself_normalized_trials = 50\n"
      "estimation_runs = 2\n");
  cfg.out = dir.string();
  const VerifyOutputs v = execute_verify(cfg, Execution::kParallel);
  CHECK(v.lemmas.size() == 5);
  CHECK(v.all_passed());
  const auto json = nlohmann::json::parse(read_text(dir / "verify_lemmas.json"));
  CHECK(json.is_array());
  CHECK(json.size() == 5);
  CHECK(first_line(read_text(dir / "verify_summary.csv")) == kLemmaHeader);
}

TEST_CASE("report table") {
  const fs::path dir = scratch("report");
  RunConfig cfg = small_run(dir);
  cfg.seeds = {1, 2};
  execute_run(cfg, Execution::kSerial);
  const std::vector<fs::path> one{dir / "evodpo_summary.json"};
  const std::string table = report_from_files(one);
  CHECK(first_line(table) == kTableHeader);
  CHECK(csv_rows(table).size() == 1);

  const std::vector<fs::path> missing{dir / "nothing_here.json"};
  try {
    report_from_files(missing);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("nothing_here.json") != std::string::npos);
  }

  write_text(dir / "bad.json", "{\"mode\": \"evodpo\"}");
  const std::vector<fs::path> bad{dir / "bad.json"};
  CHECK_THROWS(report_from_files(bad));
}

TEST_CASE("float formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567}) {
    CHECK(std::stod(format_real(v)) == v);
  }
}

TEST_CASE("command-line tool") {
  const fs::path dir = scratch("cli");
  const std::string cli = EVODPO_CLI_PATH;
  const std::string run = cli + " run --mode fixed-ref --seed 4 --set H=120 --set delta_min=0.1 --set delta_max=0.5 --out " +
                          dir.string() + " > " + (dir / "stdout.txt").string();
  CHECK(std::system(run.c_str()) == 0);
  CHECK(fs::exists(dir / "fixed-ref_seed4_ledger.csv"));
  CHECK(fs::exists(dir / "fixed-ref_summary.json"));

  const std::string report = cli + " report " + (dir / "fixed-ref_summary.json").string() +
                             " --out " + (dir / "table.csv").string();
  CHECK(std::system(report.c_str()) == 0);
  CHECK(first_line(read_text(dir / "table.csv")) == kTableHeader);

  const std::string broken = cli + " run --set delta_H=-1 --out " + dir.string() + " 2> " +
                             (dir / "stderr.txt").string();
  CHECK(std::system(broken.c_str()) != 0);
  CHECK(read_text(dir / "stderr.txt").find("delta_H") != std::string::npos);
}
