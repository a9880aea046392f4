#pragma once

// CSV / JSON emission and the cross-run comparison table. Floats in CSV are
// written with 17 significant digits so every value round-trips.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evodpo/atlas.hpp"
#include "evodpo/evodpo.hpp"
#include "evodpo/regret.hpp"
#include "evodpo/verify.hpp"

namespace evodpo {

inline constexpr std::string_view kLedgerHeader =
    "t,phase,bias,error,regret_step,regret_cum,oracle_arm,switch";
inline constexpr std::string_view kPhaseHeader =
    "k,n_pairs,delta_S,kl_hat,accepted,beta,eps_s,delta_H";
inline constexpr std::string_view kRoundHeader =
    "round,best_score,mean_score,threshold,coverage,phase_attempted";
inline constexpr std::string_view kLemmaHeader =
    "lemma,trials,violations,excluded,violation_rate,allowed_rate,max_slack_ratio,passed";
inline constexpr std::string_view kTableHeader =
    "method,metric,seeds,mean,sem,slope_exponent,accept_rate";

std::string format_real(double v);

std::string ledger_csv(const RegretLedger& ledger);
std::string phases_csv(std::span<const PhaseReport> phases);
std::string rounds_csv(std::span<const RoundRecord> rounds);
std::string lemma_csv(std::span<const LemmaReport> reports);
std::string lemma_json(std::span<const LemmaReport> reports);
std::string scaling_json(const ScalingReport& report);

struct RunSummary {
  std::string mode;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_metric_per_seed;
  double mean = 0.0;
  double sem = 0.0;
  std::optional<double> slope_exponent;
  std::optional<double> accept_rate;
};

std::string summary_json(const RunSummary& summary);
// Throws std::runtime_error naming `source` when keys are missing or mistyped.
RunSummary parse_summary(std::string_view text, const std::string& source);

// Name of the per-seed final metric reported for a mode.
std::string metric_name(std::string_view mode);

// One row per summary: method x (final metric mean/SEM, slope, accept rate).
std::string comparison_table_csv(std::span<const RunSummary> summaries);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace evodpo
