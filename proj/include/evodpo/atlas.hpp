#pragma once

// The island-model search loop without language models: the candidate space
// is SW-LinUCB hyperparameters scored by simulated reward-bandit episodes,
// islands sample from a shared categorical policy over a strategy menu, and
// fine-tuning phases turn top-s buffer entries into preference pairs for the
// evodpo phase step.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "evodpo/env.hpp"
#include "evodpo/evodpo.hpp"
#include "evodpo/policy.hpp"
#include "evodpo/regret.hpp"
#include "evodpo/sweep.hpp"

namespace evodpo {

struct StrategyCandidate {
  int window_size = 50;
  double lambda_reg = 1.0;
  double ucb_alpha = 1.0;

  void validate() const;
  bool operator==(const StrategyCandidate&) const = default;
};

// Sliding-window ridge state: A = sum x x^T + lambda I, b = sum r x over the
// last `window` observations.
class LinUcbState {
 public:
  LinUcbState(int dim, const StrategyCandidate& hyper);
  void update(const Vector& x, double reward);
  const Matrix& design() const { return a_; }
  const Vector& response() const { return b_; }
  std::size_t size() const { return history_.size(); }
  int window() const { return window_; }
  double lambda() const { return lambda_; }
  Vector theta_hat() const;

 private:
  void rebuild();

  int window_;
  double lambda_;
  Matrix a_;
  Vector b_;
  std::deque<std::pair<Vector, double>> history_;
  int evictions_since_rebuild_ = 0;
};

// argmax_a <theta_hat, x_a> + alpha sqrt(x_a^T A^{-1} x_a); ties to the lowest index.
int sw_linucb_select(const Matrix& arm_features, const LinUcbState& state,
                     const StrategyCandidate& hyper);

struct BanditConfig {
  int arms = 5;
  int dim = 5;
  int horizon = 2000;
  ContextMode context_mode = ContextMode::kFresh;
  DriftConfig drift;
  double tv_budget = 8000.0;
  double noise_scale = 1.0;

  void validate() const;
};

// Scoring episodes for the strategy search: H = 500, otherwise defaults.
inline BanditConfig short_episode() {
  BanditConfig cfg;
  cfg.horizon = 500;
  return cfg;
}

struct BanditEpisode {
  std::vector<double> chosen;   // expected reward of the pulled arm
  std::vector<double> optimal;  // expected reward of the best arm
  double nmr = 0.0;
  double mean_regret = 0.0;
  RegretLedger ledger;  // reward mode: bias 0, error = regret
};

BanditEpisode run_reward_bandit(const BanditConfig& cfg, const StrategyCandidate& hyper,
                                std::uint64_t seed);

// Grid cell of (log2 W in 0..10, log10 lambda in -3..1, alpha in {0, .5, 1, 2}).
int cluster_label(const StrategyCandidate& c);
inline constexpr int kClusterCount = 11 * 5 * 4;

struct BufferEntry {
  int round = 0;
  int island = 0;
  int menu_arm = 0;  // action of the strategy policy the candidate came from
  StrategyCandidate candidate;
  double score = 0.0;
  int cluster = 0;
  bool failed = false;  // scorer failure, excluded from pairing
};

struct IslandBuffer {
  int island = 0;
  std::vector<BufferEntry> entries;
  double proposal_scale = 0.25;
  double best_score = -1e300;
  int stale_steps = 0;
};

struct StrategyMenu {
  std::vector<StrategyCandidate> items;
  FeatureSet features;  // unit-norm embeddings, one row per item
};
StrategyMenu default_menu();

using CandidateScorer = std::function<double(const StrategyCandidate&)>;

struct IslandOptions {
  int candidates_per_step = 1;  // J
  int stagnation_limit = 10;
  double max_scale = 2.0;
};

// One round: every island draws J menu actions from its policy row,
// perturbs them at its own proposal scale, scores and appends. Island i
// draws only from Rng::substream(seed, kIslands, round * islands + i).
void island_step(std::vector<IslandBuffer>& islands, const CategoricalPolicy& policy,
                 const StrategyMenu& menu, const CandidateScorer& scorer,
                 const IslandOptions& opts, int round, std::uint64_t seed,
                 Execution exec = Execution::kSerial);

// Winners: the top s passed entries by score (earlier entry wins rank ties).
// Each winner takes one loser drawn from the failed entries, or from the
// passed entries below the top s when nothing failed. Pairs whose loser
// shares the winner's menu action are redrawn among the other losers and
// dropped when none remain. The pair context is the winner's island.
std::vector<PreferencePair> build_pairs_top_s(std::span<const BufferEntry> entries,
                                              int s, double threshold, Rng& rng);

struct Telemetry {
  std::vector<double> phase_score_mean;
  std::vector<double> phase_score_max;
  std::vector<bool> accepted;
  std::vector<bool> gated;
  std::vector<double> delta_S;
  std::vector<int> dataset_sizes;
};

// Rule-based stand-in for the fine-tuning strategist: after two consecutive
// rejected phases, beta *= 0.8 (floor 0.1) and the pairing quantile rises
// by 0.1 (cap 0.9). beta always ends in [0.1, 5].
PhaseConfig strategist_rules(const Telemetry& telemetry, const PhaseConfig& current);

struct AtlasConfig {
  int rounds = 100;
  int islands = 6;
  PhaseConfig phase;
  int top_s = 8;
  int max_phases = -1;  // negative: rounds / phase_length
  bool fine_tuning = true;
  int dataset_phases = 4;
  double lambda = 1.0;
  int threshold_window = 50;
  IslandOptions island;
  BanditConfig episode = short_episode();
  int episodes = 3;
  Execution execution = Execution::kSerial;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  double best_score = 0.0;
  double mean_score = 0.0;
  double threshold = 0.0;
  int coverage = 0;
  bool phase_attempted = false;
};

struct PhaseInput {
  int round = 0;  // 1-based count of completed rounds
  double threshold = 0.0;
  int top_s = 0;
  std::vector<BufferEntry> entries;
  std::vector<PreferencePair> pairs;
};

struct AtlasRun {
  std::vector<PhaseReport> phases;
  std::vector<PhaseInput> phase_inputs;
  std::vector<RoundRecord> rounds;
  std::vector<IslandBuffer> islands;
  Telemetry telemetry;
  CategoricalPolicy policy;
  CategoricalPolicy reference;
  std::vector<PhaseConfig> configs;  // PhaseConfig in force at each phase
};

AtlasRun run_atlas(const AtlasConfig& cfg, std::uint64_t seed);

}  // namespace evodpo
