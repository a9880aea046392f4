#include "evodpo/runner.hpp"

#include <cmath>
#include <stdexcept>

namespace evodpo {

namespace {

std::vector<double> regret_checkpoints(const RegretLedger& ledger) {
  const std::size_t h = ledger.size();
  std::vector<double> out;
  if (h < 8) return out;
  for (std::size_t t : {h / 8, h / 4, h / 2, h}) out.push_back(ledger.rows()[t - 1].regret_cum);
  return out;
}

void count_gates(std::span<const PhaseReport> phases, SeedResult& r) {
  r.has_phases = true;
  for (const PhaseReport& p : phases) {
    if (p.n_pairs == 0) continue;
    ++r.gated;
    if (p.accepted) ++r.accepted;
  }
}

std::string seed_file(const RunConfig& cfg, std::uint64_t seed, const char* suffix) {
  return to_string(cfg.mode) + "_seed" + std::to_string(seed) + suffix;
}

}  // namespace

SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  switch (cfg.mode) {
    case RunMode::kEvoDpo:
    case RunMode::kFixedRef: {
      const EvoDpoRun run = run_evodpo(cfg.evodpo(), seed);
      r.final_metric = run.ledger.cumulative();
      r.checkpoints = regret_checkpoints(run.ledger);
      count_gates(run.phases, r);
      r.ledger_csv = ledger_csv(run.ledger);
      r.phases_csv = phases_csv(run.phases);
      break;
    }
    case RunMode::kRewardBandit: {
      const BanditEpisode ep = run_reward_bandit(cfg.reward_bandit(), cfg.bandit, seed);
      r.final_metric = ep.nmr;
      r.checkpoints = regret_checkpoints(ep.ledger);
      r.ledger_csv = ledger_csv(ep.ledger);
      break;
    }
    case RunMode::kAtlas: {
      const AtlasRun run = run_atlas(cfg.atlas(), seed);
      r.final_metric = run.rounds.back().best_score;
      count_gates(run.phases, r);
      r.phases_csv = phases_csv(run.phases);
      r.rounds_csv = rounds_csv(run.rounds);
      break;
    }
    case RunMode::kVerify:
      throw std::invalid_argument("run_seed: verify mode has no per-seed run");
  }
  return r;
}

RunSummary summarize(const RunConfig& cfg, std::span<const SeedResult> results) {
  if (results.empty()) throw std::invalid_argument("summarize: no results");
  RunSummary s;
  s.mode = to_string(cfg.mode);
  int accepted = 0;
  int gated = 0;
  bool phases = false;
  std::vector<double> curve;
  bool curve_ok = true;
  for (const SeedResult& r : results) {
    s.seeds.push_back(r.seed);
    s.final_metric_per_seed.push_back(r.final_metric);
    accepted += r.accepted;
    gated += r.gated;
    phases = phases || r.has_phases;
    if (r.checkpoints.empty()) {
      curve_ok = false;
    } else {
      curve.resize(r.checkpoints.size(), 0.0);
      for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
        curve[i] += r.checkpoints[i] / static_cast<double>(results.size());
      }
    }
  }
  s.mean = mean(s.final_metric_per_seed);
  s.sem = sem(s.final_metric_per_seed);
  if (curve_ok && !curve.empty()) {
    bool positive = true;
    for (double v : curve) positive = positive && v > 0.0;
    if (positive) {
      const double h = static_cast<double>(cfg.horizon);
      const std::vector<double> hs{std::floor(h / 8), std::floor(h / 4), std::floor(h / 2), h};
      s.slope_exponent = slope_fit(hs, curve);
    }
  }
  if (phases && gated > 0) s.accept_rate = static_cast<double>(accepted) / gated;
  return s;
}

RunOutputs execute_run(const RunConfig& cfg, Execution exec) {
  validate(cfg);
  if (cfg.mode == RunMode::kVerify) throw std::invalid_argument("use execute_verify for verify mode");
  const std::size_t n = cfg.seeds.count();
  const std::vector<SeedResult> results = map_trials<SeedResult>(
      n, [&](std::size_t i) { return run_seed(cfg, cfg.seeds.first + i); }, exec);

  RunOutputs out;
  const std::filesystem::path dir(cfg.out);
  for (const SeedResult& r : results) {
    if (!r.ledger_csv.empty()) {
      out.files.push_back(dir / seed_file(cfg, r.seed, "_ledger.csv"));
      write_text(out.files.back(), r.ledger_csv);
    }
    if (!r.phases_csv.empty()) {
      out.files.push_back(dir / seed_file(cfg, r.seed, "_phases.csv"));
      write_text(out.files.back(), r.phases_csv);
    }
    if (!r.rounds_csv.empty()) {
      out.files.push_back(dir / seed_file(cfg, r.seed, "_rounds.csv"));
      write_text(out.files.back(), r.rounds_csv);
    }
  }
  out.summary = summarize(cfg, results);
  out.files.push_back(dir / (to_string(cfg.mode) + "_summary.json"));
  write_text(out.files.back(), summary_json(out.summary));
  return out;
}

bool VerifyOutputs::all_passed() const {
  for (const LemmaReport& r : lemmas) {
    if (!r.passed()) return false;
  }
  return true;
}

VerifyOutputs execute_verify(const RunConfig& cfg, Execution exec) {
  validate(cfg);
  const std::uint64_t seed = cfg.seeds.first;
  VerifyOutputs out;
  out.lemmas.push_back(check_kl_bound(cfg.kl_trials, seed, {}, exec));
  out.lemmas.push_back(check_switching_budget(cfg.drift_runs, seed, {}, exec));
  out.lemmas.push_back(check_local_variation(cfg.drift_runs, seed, {}, exec));
  out.lemmas.push_back(check_self_normalized(cfg.self_normalized_trials, cfg.delta, seed, {}, exec));
  out.lemmas.push_back(check_estimation_error(cfg.estimation_runs, cfg.delta, seed, {}, exec));

  const std::filesystem::path dir(cfg.out);
  out.files.push_back(dir / "verify_lemmas.json");
  write_text(out.files.back(), lemma_json(out.lemmas));
  out.files.push_back(dir / "verify_summary.csv");
  write_text(out.files.back(), lemma_csv(out.lemmas));
  if (cfg.verify_scaling) {
    ScalingConfig sc;
    sc.seeds = cfg.scaling_seeds;
    sc.seed = seed;
    sc.base = sustained_drift_config();
    sc.base.phase = cfg.phase;
    sc.base.lambda = cfg.lambda;
    sc.base.kappa = cfg.kappa;
    sc.execution = exec;
    out.scaling = check_regret_scaling(sc);
    out.scaling_ran = true;
    out.files.push_back(dir / "verify_scaling.json");
    write_text(out.files.back(), scaling_json(out.scaling));
  }
  return out;
}

std::string report_from_files(std::span<const std::filesystem::path> summaries) {
  if (summaries.empty()) throw std::invalid_argument("report: need at least one summary file");
  std::vector<RunSummary> parsed;
  for (const auto& path : summaries) parsed.push_back(parse_summary(read_text(path), path.string()));
  return comparison_table_csv(parsed);
}

}  // namespace evodpo
