#pragma once

// key = value run configuration with the default hyperparameters.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "evodpo/atlas.hpp"
#include "evodpo/evodpo.hpp"

namespace evodpo {

enum class RunMode { kEvoDpo, kFixedRef, kAtlas, kRewardBandit, kVerify };

std::string to_string(RunMode mode);
RunMode parse_mode(std::string_view name);

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(int line, const std::string& what)
      : std::invalid_argument(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct SeedRange {
  std::uint64_t first = 1;
  std::uint64_t last = 5;
  std::size_t count() const { return static_cast<std::size_t>(last - first + 1); }
};
// "N..M" (inclusive) or a single "N".
SeedRange parse_seed_range(std::string_view text);

struct RunConfig {
  RunMode mode = RunMode::kEvoDpo;
  int arms = 5;          // K
  int dim = 5;           // d
  int horizon = 2000;    // H
  ContextMode contexts = ContextMode::kFresh;
  DriftConfig drift;
  double tv_budget = 8000.0;  // V_T
  double kappa = 2.0 / 3.0;
  double lambda = 1.0;
  PhaseConfig phase;
  GateMode gate = GateMode::kInspector;
  ScorerSource scorer = ScorerSource::kEstimated;
  int max_phases = -1;
  SeedRange seeds;
  std::string out = "results";

  // reward-bandit
  StrategyCandidate bandit;
  double noise = 1.0;

  // atlas
  int rounds = 100;
  int islands = 6;
  int top_s = 8;
  int dataset_phases = 4;
  int episode_horizon = 500;
  int episodes = 3;
  int candidates_per_step = 1;
  bool fine_tuning = true;

  // verify
  int kl_trials = 1000;
  int drift_runs = 100;
  int self_normalized_trials = 2000;
  int estimation_runs = 50;
  double delta = 0.05;
  bool verify_scaling = false;
  int scaling_seeds = 20;

  EvoDpoConfig evodpo() const;
  BanditConfig reward_bandit() const;
  AtlasConfig atlas() const;
};

// Lines are "key = value"; '#' starts a comment. Omitted keys keep their
// defaults. Unknown keys, malformed lines and out-of-range values throw
// ConfigError naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

// Applies one key = value to cfg (also used for command-line overrides).
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, int line = 0);
void validate(const RunConfig& cfg);

}  // namespace evodpo
