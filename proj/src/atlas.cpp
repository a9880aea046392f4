#include "evodpo/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "evodpo/errors.hpp"

namespace evodpo {

namespace {

constexpr double kAlphaGrid[] = {0.0, 0.5, 1.0, 2.0};

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

StrategyCandidate perturb(const StrategyCandidate& base, double scale, Rng& rng) {
  StrategyCandidate c;
  const double w = static_cast<double>(base.window_size) * std::exp2(scale * rng.normal());
  c.window_size = std::clamp(static_cast<int>(std::lround(w)), 1, 1024);
  c.lambda_reg = std::clamp(base.lambda_reg * std::pow(10.0, 0.5 * scale * rng.normal()),
                            1e-3, 10.0);
  c.ucb_alpha = std::clamp(base.ucb_alpha + scale * rng.normal(), 0.0, 3.0);
  return c;
}

int coverage(const std::vector<IslandBuffer>& islands) {
  std::vector<bool> seen(kClusterCount, false);
  int count = 0;
  for (const IslandBuffer& b : islands) {
    for (const BufferEntry& e : b.entries) {
      if (!seen[static_cast<std::size_t>(e.cluster)]) {
        seen[static_cast<std::size_t>(e.cluster)] = true;
        ++count;
      }
    }
  }
  return count;
}

}  // namespace

void StrategyCandidate::validate() const {
  if (window_size < 1) throw ContractError("window_size must be >= 1");
  if (!(lambda_reg > 0.0)) throw ContractError("lambda_reg must be > 0");
  if (!(ucb_alpha >= 0.0)) throw ContractError("ucb_alpha must be >= 0");
}

LinUcbState::LinUcbState(int dim, const StrategyCandidate& hyper)
    : window_(hyper.window_size),
      lambda_(hyper.lambda_reg),
      a_(hyper.lambda_reg * Matrix::Identity(dim, dim)),
      b_(Vector::Zero(dim)) {
  hyper.validate();
}

void LinUcbState::update(const Vector& x, double reward) {
  history_.emplace_back(x, reward);
  a_.noalias() += x * x.transpose();
  b_ += reward * x;
  if (history_.size() > static_cast<std::size_t>(window_)) {
    const auto& [old_x, old_r] = history_.front();
    a_.noalias() -= old_x * old_x.transpose();
    b_ -= old_r * old_x;
    history_.pop_front();
    // Downdates accumulate roundoff; refresh from the window periodically.
    if (++evictions_since_rebuild_ >= window_) rebuild();
  }
}

void LinUcbState::rebuild() {
  const Eigen::Index d = a_.rows();
  a_ = lambda_ * Matrix::Identity(d, d);
  b_.setZero();
  for (const auto& [x, r] : history_) {
    a_.noalias() += x * x.transpose();
    b_ += r * x;
  }
  evictions_since_rebuild_ = 0;
}

Vector LinUcbState::theta_hat() const { return a_.ldlt().solve(b_); }

int sw_linucb_select(const Matrix& arm_features, const LinUcbState& state,
                     const StrategyCandidate& hyper) {
  if (arm_features.cols() != state.design().rows()) {
    throw ContractError("sw_linucb_select: feature dimension mismatch");
  }
  if (hyper.window_size != state.window()) {
    throw ContractError("sw_linucb_select: state window differs from hyperparameters");
  }
  const Eigen::LDLT<Matrix> solver(state.design());
  const Vector theta = solver.solve(state.response());
  const Matrix inv_x = solver.solve(arm_features.transpose());  // d x K
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < arm_features.rows(); ++a) {
    const double quad = std::max(0.0, arm_features.row(a).dot(inv_x.col(a)));
    const double value = arm_features.row(a).dot(theta) + hyper.ucb_alpha * std::sqrt(quad);
    if (value > best_value) {
      best_value = value;
      best = static_cast<int>(a);
    }
  }
  return best;
}

void BanditConfig::validate() const {
  if (arms < 2) throw ContractError("K must be >= 2");
  if (dim < 1) throw ContractError("d must be >= 1");
  if (horizon < 1) throw ContractError("H must be >= 1");
  if (!(noise_scale >= 0.0)) throw ContractError("noise_scale must be >= 0");
  if (!(tv_budget >= 0.0)) throw ContractError("V_T must be >= 0");
  drift.validate();
}

BanditEpisode run_reward_bandit(const BanditConfig& cfg, const StrategyCandidate& hyper,
                                std::uint64_t seed) {
  cfg.validate();
  hyper.validate();
  Rng env_rng = Rng::substream(seed, Stream::kEnvironment);
  Rng context_rng = Rng::substream(seed, Stream::kContexts);
  Rng reward_rng = Rng::substream(seed, Stream::kLabels);
  const ThetaPath path = make_theta_path(cfg.horizon, cfg.dim, cfg.drift, cfg.tv_budget, env_rng);
  const ContextTable contexts =
      make_contexts(cfg.context_mode, cfg.horizon, cfg.arms, cfg.dim, context_rng);

  BanditEpisode out;
  out.chosen.reserve(static_cast<std::size_t>(cfg.horizon));
  out.optimal.reserve(static_cast<std::size_t>(cfg.horizon));
  LinUcbState state(cfg.dim, hyper);
  for (int t = 0; t < cfg.horizon; ++t) {
    const Vector& theta = path.thetas[static_cast<std::size_t>(t)];
    const FeatureSet& fs = contexts.sets[static_cast<std::size_t>(contexts.context_at(t))];
    const Vector u = utilities(theta, fs);
    const int star = oracle_action(u);
    const bool switched =
        t > 0 && oracle_action(path.thetas[static_cast<std::size_t>(t - 1)], fs) != star;
    const int arm = sw_linucb_select(fs.rows, state, hyper);
    const Vector x = fs.feature(arm);
    state.update(x, sample_reward(theta, x, reward_rng, cfg.noise_scale));
    out.chosen.push_back(u[arm]);
    out.optimal.push_back(u[star]);
    RegretTerms terms;
    terms.error = u[star] - u[arm];
    terms.regret = terms.error;
    out.ledger.append(t, 0, terms, star, switched);
  }
  out.nmr = nmr(out.chosen, out.optimal);
  out.mean_regret = -out.nmr;
  return out;
}

int cluster_label(const StrategyCandidate& c) {
  const int w = std::clamp(static_cast<int>(std::lround(std::log2(c.window_size))), 0, 10);
  const int l = std::clamp(static_cast<int>(std::lround(std::log10(c.lambda_reg))), -3, 1) + 3;
  int a = 0;
  for (int i = 1; i < 4; ++i) {
    if (std::abs(c.ucb_alpha - kAlphaGrid[i]) < std::abs(c.ucb_alpha - kAlphaGrid[a])) a = i;
  }
  return (w * 5 + l) * 4 + a;
}

StrategyMenu default_menu() {
  StrategyMenu menu;
  for (int w : {5, 20, 50, 200}) {
    for (double lam : {0.1, 1.0}) {
      for (double alpha : {0.1, 1.0}) menu.items.push_back({w, lam, alpha});
    }
  }
  const int k = static_cast<int>(menu.items.size());
  menu.features.rows.resize(k, 4);
  for (int i = 0; i < k; ++i) {
    const StrategyCandidate& c = menu.items[static_cast<std::size_t>(i)];
    Eigen::Vector4d e(std::log2(c.window_size) / 10.0, std::log10(c.lambda_reg) + 1.0,
                      c.ucb_alpha, 1.0);
    menu.features.rows.row(i) = e.normalized().transpose();
  }
  return menu;
}

void island_step(std::vector<IslandBuffer>& islands, const CategoricalPolicy& policy,
                 const StrategyMenu& menu, const CandidateScorer& scorer,
                 const IslandOptions& opts, int round, std::uint64_t seed,
                 Execution exec) {
  if (policy.contexts() != static_cast<int>(islands.size())) {
    throw ContractError("island_step: policy must have one context per island");
  }
  if (opts.candidates_per_step < 1) throw ContractError("island_step: J must be >= 1");
  const std::size_t n = islands.size();
  auto step = [&](std::size_t i) {
    IslandBuffer& buf = islands[i];
    Rng rng = Rng::substream(seed, Stream::kIslands,
                             static_cast<std::uint64_t>(round) * n + i);
    const Vector row = policy.row(static_cast<int>(i));
    for (int j = 0; j < opts.candidates_per_step; ++j) {
      BufferEntry e;
      e.round = round;
      e.island = static_cast<int>(i);
      e.menu_arm = static_cast<int>(rng.categorical(
          std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
      e.candidate = perturb(menu.items[static_cast<std::size_t>(e.menu_arm)],
                            buf.proposal_scale, rng);
      e.cluster = cluster_label(e.candidate);
      try {
        e.score = scorer(e.candidate);
        e.failed = !std::isfinite(e.score);
      } catch (const std::exception&) {
        e.failed = true;
      }
      if (e.failed) e.score = 0.0;
      if (!e.failed && e.score > buf.best_score) {
        buf.best_score = e.score;
        buf.stale_steps = 0;
      } else if (++buf.stale_steps >= opts.stagnation_limit) {
        buf.proposal_scale = std::min(2.0 * buf.proposal_scale, opts.max_scale);
        buf.stale_steps = 0;
      }
      buf.entries.push_back(e);
    }
    return 0;
  };
  map_trials<int>(n, step, exec);
}

std::vector<PreferencePair> build_pairs_top_s(std::span<const BufferEntry> entries,
                                              int s, double threshold, Rng& rng) {
  if (s < 1) throw ContractError("build_pairs_top_s: s must be >= 1");
  std::vector<std::size_t> passed;
  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].failed) continue;
    (entries[i].score >= threshold ? passed : failed).push_back(i);
  }
  std::stable_sort(passed.begin(), passed.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].score > entries[b].score;
  });
  const std::size_t top = std::min(passed.size(), static_cast<std::size_t>(s));
  const std::vector<std::size_t> lower(passed.begin() + static_cast<std::ptrdiff_t>(top),
                                       passed.end());
  const std::vector<std::size_t>& losers = failed.empty() ? lower : failed;

  std::vector<PreferencePair> pairs;
  for (std::size_t r = 0; r < top; ++r) {
    const BufferEntry& win = entries[passed[r]];
    std::vector<std::size_t> options;
    for (std::size_t l : losers) {
      if (entries[l].menu_arm != win.menu_arm) options.push_back(l);
    }
    if (options.empty()) continue;
    const BufferEntry& lose = entries[options[rng.index(options.size())]];
    PreferencePair p;
    p.context = win.island;
    p.winner = win.menu_arm;
    p.loser = lose.menu_arm;
    p.meta.island = win.island;
    p.meta.winner_score = win.score;
    p.meta.loser_score = lose.score;
    pairs.push_back(p);
  }
  return pairs;
}

PhaseConfig strategist_rules(const Telemetry& telemetry, const PhaseConfig& current) {
  PhaseConfig next = current;
  const std::size_t n = telemetry.accepted.size();
  if (n >= 2 && telemetry.gated[n - 1] && telemetry.gated[n - 2] &&
      !telemetry.accepted[n - 1] && !telemetry.accepted[n - 2]) {
    next.beta = std::max(0.1, current.beta * 0.8);
    next.pair_quantile = std::min(0.9, current.pair_quantile + 0.1);
  }
  next.beta = std::clamp(next.beta, 0.1, 5.0);
  return next;
}

void AtlasConfig::validate() const {
  if (rounds < 1) throw ContractError("rounds must be >= 1");
  if (islands < 1) throw ContractError("islands must be >= 1");
  if (top_s < 1) throw ContractError("top_s must be >= 1");
  if (dataset_phases < 1) throw ContractError("dataset_phases must be >= 1");
  if (!(lambda > 0.0)) throw ContractError("lambda must be > 0");
  if (threshold_window < 1) throw ContractError("threshold_window must be >= 1");
  if (episodes < 1) throw ContractError("episodes must be >= 1");
  phase.validate();
  episode.validate();
}

AtlasRun run_atlas(const AtlasConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const StrategyMenu menu = default_menu();
  const int arms = menu.features.arms();
  ContextTable contexts;
  contexts.sets.assign(static_cast<std::size_t>(cfg.islands), menu.features);

  std::vector<std::uint64_t> episode_seeds;
  Rng seed_rng = Rng::substream(seed, Stream::kScoring);
  for (int e = 0; e < cfg.episodes; ++e) episode_seeds.push_back(seed_rng.next());
  const CandidateScorer scorer = [&](const StrategyCandidate& c) {
    double total = 0.0;
    for (std::uint64_t s : episode_seeds) total += run_reward_bandit(cfg.episode, c, s).nmr;
    return total / static_cast<double>(episode_seeds.size());
  };

  AtlasRun run;
  run.reference = CategoricalPolicy::uniform(cfg.islands, arms);
  run.policy = run.reference;
  for (int i = 0; i < cfg.islands; ++i) run.islands.push_back(IslandBuffer{i, {}});

  Rng pair_rng = Rng::substream(seed, Stream::kLabels);
  Rng gate_rng = Rng::substream(seed, Stream::kGate);
  PhaseConfig pc = cfg.phase;
  const int phase_budget =
      cfg.max_phases >= 0 ? cfg.max_phases : cfg.rounds / pc.phase_length;
  const DpoSolverOptions solver{cfg.lambda};
  std::vector<double> score_history;
  std::deque<std::vector<PreferencePair>> dataset;
  int last_phase_round = 0;
  int reference_version = 0;

  for (int r = 0; r < cfg.rounds; ++r) {
    island_step(run.islands, run.policy, menu, scorer, cfg.island, r, seed, cfg.execution);
    RoundRecord rec;
    rec.round = r + 1;
    double round_total = 0.0;
    int round_count = 0;
    rec.best_score = -1e300;
    for (const IslandBuffer& b : run.islands) {
      for (const BufferEntry& e : b.entries) {
        if (e.round != r || e.failed) continue;
        score_history.push_back(e.score);
        round_total += e.score;
        ++round_count;
      }
      rec.best_score = std::max(rec.best_score, b.best_score);
    }
    rec.mean_score = round_count > 0 ? round_total / round_count : 0.0;
    const std::size_t keep =
        std::min(score_history.size(), static_cast<std::size_t>(cfg.threshold_window));
    rec.threshold = keep > 0 ? quantile(std::vector<double>(score_history.end() -
                                                                static_cast<std::ptrdiff_t>(keep),
                                                            score_history.end()),
                                        pc.pair_quantile)
                             : 0.0;
    rec.coverage = coverage(run.islands);

    const int completed = r + 1;
    if (!cfg.fine_tuning || completed % pc.phase_length != 0 ||
        static_cast<int>(run.phases.size()) >= phase_budget) {
      run.rounds.push_back(rec);
      continue;
    }
    rec.phase_attempted = true;
    run.rounds.push_back(rec);

    PhaseInput input;
    input.round = completed;
    input.threshold = rec.threshold;
    input.top_s = cfg.top_s;
    for (const IslandBuffer& b : run.islands) {
      for (const BufferEntry& e : b.entries) {
        if (e.round >= last_phase_round && e.round < completed) input.entries.push_back(e);
      }
    }
    last_phase_round = completed;
    input.pairs = build_pairs_top_s(input.entries, cfg.top_s, rec.threshold, pair_rng);
    for (PreferencePair& p : input.pairs) p.meta.phase = static_cast<int>(run.phases.size()) + 1;
    dataset.push_back(input.pairs);
    if (dataset.size() > static_cast<std::size_t>(cfg.dataset_phases)) dataset.pop_front();
    std::vector<PreferencePair> pairs;
    for (const auto& chunk : dataset) pairs.insert(pairs.end(), chunk.begin(), chunk.end());

    PhaseReport report;
    report.k = static_cast<int>(run.phases.size()) + 1;
    report.n_pairs = static_cast<int>(pairs.size());
    report.beta = pc.beta;
    report.eps_s = pc.eps_s;
    report.delta_H = pc.delta_H;
    report.reference_before = reference_version;
    run.configs.push_back(pc);

    double phase_total = 0.0;
    double phase_max = -1e300;
    int phase_count = 0;
    for (const BufferEntry& e : input.entries) {
      if (e.failed) continue;
      phase_total += e.score;
      phase_max = std::max(phase_max, e.score);
      ++phase_count;
    }
    run.telemetry.phase_score_mean.push_back(phase_count > 0 ? phase_total / phase_count : 0.0);
    run.telemetry.phase_score_max.push_back(phase_count > 0 ? phase_max : 0.0);
    run.telemetry.dataset_sizes.push_back(report.n_pairs);

    if (pairs.empty()) {
      report.skipped = true;
    } else {
      const std::span<const PreferencePair> all(pairs);
      DpoFit final_fit = fit_dpo(run.reference, all, contexts, pc.beta, solver);
      const std::size_t half = pairs.size() / 2;
      DpoFit mid_fit = half > 0
                           ? fit_dpo(run.reference, all.first(half), contexts, pc.beta, solver)
                           : final_fit;
      report.loss_trace = final_fit.loss_trace;
      std::vector<int> pool;
      for (const PreferencePair& p : pairs) pool.push_back(p.context);
      const GateSubset subset =
          sample_gate_subset(pool, static_cast<std::size_t>(pc.gate_size), gate_rng);
      const Matrix score_utilities = utility_table(final_fit.reward_weights, contexts);
      const CategoricalPolicy* candidates[] = {&final_fit.policy, &mid_fit.policy,
                                               &run.reference};
      const Proposal proposal =
          propose_reference(candidates, subset, pc.beta_ref, run.reference, score_utilities);
      const std::size_t chosen = static_cast<std::size_t>(proposal.index);
      report.selected_candidate = proposal.index;
      report.gate_contexts = subset.contexts;
      report.delta_S = proposal.scores[chosen] - proposal.scores[2];
      report.kl_hat = proposal.kls[chosen];
      report.accepted = gate(report.delta_S, report.kl_hat, pc);
      if (report.accepted) {
        CategoricalPolicy promoted = *candidates[chosen];
        run.reference = std::move(promoted);
        ++reference_version;
      }
      run.policy = std::move(final_fit.policy);
    }
    report.reference_after = reference_version;
    run.telemetry.gated.push_back(!report.skipped);
    run.telemetry.accepted.push_back(report.accepted);
    run.telemetry.delta_S.push_back(report.delta_S);
    run.phases.push_back(std::move(report));
    run.phase_inputs.push_back(std::move(input));
    pc = strategist_rules(run.telemetry, pc);
  }
  return run;
}

}  // namespace evodpo
