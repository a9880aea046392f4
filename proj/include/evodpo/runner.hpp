#pragma once

// Orchestration behind the command-line tool: per-seed runs of each mode,
// seed sweeps, lemma verification and report aggregation.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evodpo/config.hpp"
#include "evodpo/report.hpp"
#include "evodpo/sweep.hpp"
#include "evodpo/verify.hpp"

namespace evodpo {

struct SeedResult {
  std::uint64_t seed = 0;
  double final_metric = 0.0;
  std::vector<double> checkpoints;  // cumulative regret at H/8, H/4, H/2, H
  int accepted = 0;
  int gated = 0;
  bool has_phases = false;
  std::string ledger_csv;
  std::string phases_csv;
  std::string rounds_csv;
};

// One seed of a non-verify mode; files are returned as text, not written.
SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed);

RunSummary summarize(const RunConfig& cfg, std::span<const SeedResult> results);

struct RunOutputs {
  RunSummary summary;
  std::vector<std::filesystem::path> files;
};

// Runs every seed of cfg.seeds (concurrently for kParallel) and writes the
// per-seed CSVs plus <mode>_summary.json under cfg.out.
RunOutputs execute_run(const RunConfig& cfg, Execution exec);

struct VerifyOutputs {
  std::vector<LemmaReport> lemmas;
  bool scaling_ran = false;
  ScalingReport scaling;
  std::vector<std::filesystem::path> files;
  bool all_passed() const;
};

// Lemma checks seeded by cfg.seeds.first; the regret-scaling grid runs only
// when cfg.verify_scaling is set.
VerifyOutputs execute_verify(const RunConfig& cfg, Execution exec);

std::string report_from_files(std::span<const std::filesystem::path> summaries);

}  // namespace evodpo
