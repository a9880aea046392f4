#include "evodpo/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace evodpo {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text, int line) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(line, std::string(key) + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text, int line) {
  // from_chars for double is available in libstdc++ 11.
  return parse_number<double>(key, text, line);
}

int parse_int(std::string_view key, std::string_view text, int line) {
  return parse_number<int>(key, text, line);
}

bool parse_bool(std::string_view key, std::string_view text, int line) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw ConfigError(line, std::string(key) + ": expected 0/1 or true/false");
}

void check(bool ok, std::string_view key, const char* rule, int line) {
  if (!ok) throw ConfigError(line, std::string(key) + ": " + rule);
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view v, int line)>;

Setter real_field(double RunConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v, int line) {
    c.*field = parse_real(k, v, line);
  };
}

Setter int_field(int RunConfig::*field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v, int line) {
    c.*field = parse_int(k, v, line);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"mode", [](RunConfig& c, auto, auto v, int line) {
         try {
           c.mode = parse_mode(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(line, e.what());
         }
       }},
      {"K", int_field(&RunConfig::arms)},
      {"d", int_field(&RunConfig::dim)},
      {"H", int_field(&RunConfig::horizon)},
      {"contexts", [](RunConfig& c, auto k, auto v, int line) {
         if (v == "fresh") c.contexts = ContextMode::kFresh;
         else if (v == "fixed") c.contexts = ContextMode::kFixed;
         else throw ConfigError(line, std::string(k) + ": expected fresh or fixed");
       }},
      {"drift", [](RunConfig& c, auto k, auto v, int line) {
         if (v == "sphere") c.drift.mode = DriftMode::kSphereWalk;
         else if (v == "frozen") c.drift.mode = DriftMode::kFrozen;
         else throw ConfigError(line, std::string(k) + ": expected sphere or frozen");
       }},
      {"delta_min", [](RunConfig& c, auto k, auto v, int line) {
         c.drift.delta_min = parse_real(k, v, line);
       }},
      {"delta_max", [](RunConfig& c, auto k, auto v, int line) {
         c.drift.delta_max = parse_real(k, v, line);
       }},
      {"drift_interval", [](RunConfig& c, auto k, auto v, int line) {
         c.drift.interval = parse_int(k, v, line);
       }},
      {"V_T", real_field(&RunConfig::tv_budget)},
      {"kappa", real_field(&RunConfig::kappa)},
      {"lambda", real_field(&RunConfig::lambda)},
      {"beta", [](RunConfig& c, auto k, auto v, int line) { c.phase.beta = parse_real(k, v, line); }},
      {"beta_ref", [](RunConfig& c, auto k, auto v, int line) {
         c.phase.beta_ref = parse_real(k, v, line);
       }},
      {"eps_s", [](RunConfig& c, auto k, auto v, int line) { c.phase.eps_s = parse_real(k, v, line); }},
      {"delta_H", [](RunConfig& c, auto k, auto v, int line) {
         c.phase.delta_H = parse_real(k, v, line);
       }},
      {"phase_length", [](RunConfig& c, auto k, auto v, int line) {
         c.phase.phase_length = parse_int(k, v, line);
       }},
      {"gate_size", [](RunConfig& c, auto k, auto v, int line) {
         c.phase.gate_size = parse_int(k, v, line);
       }},
      {"pair_quantile", [](RunConfig& c, auto k, auto v, int line) {
         c.phase.pair_quantile = parse_real(k, v, line);
       }},
      {"gate", [](RunConfig& c, auto k, auto v, int line) {
         if (v == "inspector") c.gate = GateMode::kInspector;
         else if (v == "always-accept") c.gate = GateMode::kAlwaysAccept;
         else if (v == "always-reject") c.gate = GateMode::kAlwaysReject;
         else throw ConfigError(line, std::string(k) + ": expected inspector, always-accept or always-reject");
       }},
      {"scorer", [](RunConfig& c, auto k, auto v, int line) {
         if (v == "estimated") c.scorer = ScorerSource::kEstimated;
         else if (v == "oracle") c.scorer = ScorerSource::kOracle;
         else throw ConfigError(line, std::string(k) + ": expected estimated or oracle");
       }},
      {"max_phases", int_field(&RunConfig::max_phases)},
      {"seeds", [](RunConfig& c, auto k, auto v, int line) {
         try {
           c.seeds = parse_seed_range(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(line, std::string(k) + ": " + e.what());
         }
       }},
      {"out", [](RunConfig& c, auto k, auto v, int line) {
         check(!v.empty(), k, "must not be empty", line);
         c.out = std::string(v);
       }},
      {"window_size", [](RunConfig& c, auto k, auto v, int line) {
         c.bandit.window_size = parse_int(k, v, line);
       }},
      {"lambda_reg", [](RunConfig& c, auto k, auto v, int line) {
         c.bandit.lambda_reg = parse_real(k, v, line);
       }},
      {"ucb_alpha", [](RunConfig& c, auto k, auto v, int line) {
         c.bandit.ucb_alpha = parse_real(k, v, line);
       }},
      {"noise", real_field(&RunConfig::noise)},
      {"rounds", int_field(&RunConfig::rounds)},
      {"islands", int_field(&RunConfig::islands)},
      {"top_s", int_field(&RunConfig::top_s)},
      {"dataset_phases", int_field(&RunConfig::dataset_phases)},
      {"episode_H", int_field(&RunConfig::episode_horizon)},
      {"episodes", int_field(&RunConfig::episodes)},
      {"candidates_per_step", int_field(&RunConfig::candidates_per_step)},
      {"fine_tuning", [](RunConfig& c, auto k, auto v, int line) {
         c.fine_tuning = parse_bool(k, v, line);
       }},
      {"kl_trials", int_field(&RunConfig::kl_trials)},
      {"drift_runs", int_field(&RunConfig::drift_runs)},
      {"self_normalized_trials", int_field(&RunConfig::self_normalized_trials)},
      {"estimation_runs", int_field(&RunConfig::estimation_runs)},
      {"delta", real_field(&RunConfig::delta)},
      {"verify_scaling", [](RunConfig& c, auto k, auto v, int line) {
         c.verify_scaling = parse_bool(k, v, line);
       }},
      {"scaling_seeds", int_field(&RunConfig::scaling_seeds)},
  };
  return table;
}

// Range rules per key; the line recorded for each key is used in messages.
void validate_keys(const RunConfig& c, const std::map<std::string, int, std::less<>>& lines) {
  auto at = [&](std::string_view key) {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  };
  auto rule = [&](bool ok, std::string_view key, const char* text) { check(ok, key, text, at(key)); };
  rule(c.arms >= 2 && c.arms <= 1024, "K", "must lie in [2, 1024]");
  rule(c.dim >= 1 && c.dim <= 1024, "d", "must lie in [1, 1024]");
  rule(c.horizon >= 1, "H", "must be >= 1");
  rule(c.drift.delta_min >= 0.0, "delta_min", "must be >= 0");
  rule(c.drift.delta_max >= c.drift.delta_min, "delta_max", "must be >= delta_min");
  rule(c.drift.interval >= 1, "drift_interval", "must be >= 1");
  rule(c.tv_budget >= 0.0, "V_T", "must be >= 0");
  rule(c.kappa > 0.0 && c.kappa < 1.0, "kappa", "must lie in (0, 1)");
  rule(c.lambda > 0.0, "lambda", "must be > 0");
  rule(c.phase.beta > 0.0, "beta", "must be > 0");
  rule(c.phase.beta_ref > 0.0, "beta_ref", "must be > 0");
  rule(c.phase.eps_s >= 0.0, "eps_s", "must be >= 0");
  rule(c.phase.delta_H > 0.0, "delta_H", "must be > 0");
  rule(c.phase.phase_length >= 1, "phase_length", "must be >= 1");
  rule(c.phase.gate_size >= 1, "gate_size", "must be >= 1");
  rule(c.phase.pair_quantile >= 0.0 && c.phase.pair_quantile <= 1.0, "pair_quantile",
       "must lie in [0, 1]");
  rule(c.bandit.window_size >= 1, "window_size", "must be >= 1");
  rule(c.bandit.lambda_reg > 0.0, "lambda_reg", "must be > 0");
  rule(c.bandit.ucb_alpha >= 0.0, "ucb_alpha", "must be >= 0");
  rule(c.noise >= 0.0, "noise", "must be >= 0");
  rule(c.rounds >= 1, "rounds", "must be >= 1");
  rule(c.islands >= 1, "islands", "must be >= 1");
  rule(c.top_s >= 1, "top_s", "must be >= 1");
  rule(c.dataset_phases >= 1, "dataset_phases", "must be >= 1");
  rule(c.episode_horizon >= 1, "episode_H", "must be >= 1");
  rule(c.episodes >= 1, "episodes", "must be >= 1");
  rule(c.candidates_per_step >= 1, "candidates_per_step", "must be >= 1");
  rule(c.kl_trials >= 1, "kl_trials", "must be >= 1");
  rule(c.drift_runs >= 1, "drift_runs", "must be >= 1");
  rule(c.self_normalized_trials >= 1, "self_normalized_trials", "must be >= 1");
  rule(c.estimation_runs >= 1, "estimation_runs", "must be >= 1");
  rule(c.delta > 0.0 && c.delta < 1.0, "delta", "must lie in (0, 1)");
  rule(c.scaling_seeds >= 20, "scaling_seeds", "must be >= 20");
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kEvoDpo: return "evodpo";
    case RunMode::kFixedRef: return "fixed-ref";
    case RunMode::kAtlas: return "atlas";
    case RunMode::kRewardBandit: return "reward-bandit";
    case RunMode::kVerify: return "verify";
  }
  return "unknown";
}

RunMode parse_mode(std::string_view name) {
  for (RunMode m : {RunMode::kEvoDpo, RunMode::kFixedRef, RunMode::kAtlas,
                    RunMode::kRewardBandit, RunMode::kVerify}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (evodpo, fixed-ref, atlas, reward-bandit, verify)");
}

SeedRange parse_seed_range(std::string_view text) {
  text = trim(text);
  SeedRange range;
  const auto dots = text.find("..");
  auto number = [](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw std::invalid_argument("bad seed '" + std::string(s) + "'");
    }
    return v;
  };
  if (dots == std::string_view::npos) {
    range.first = range.last = number(text);
  } else {
    range.first = number(text.substr(0, dots));
    range.last = number(text.substr(dots + 2));
  }
  if (range.last < range.first) throw std::invalid_argument("seed range is empty");
  return range;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, int line) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(line, "unknown key '" + std::string(key) + "'");
  it->second(cfg, key, value, line);
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::map<std::string, int, std::less<>> lines;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(line_no, "expected 'key = value'");
    if (lines.count(key)) throw ConfigError(line_no, "duplicate key '" + std::string(key) + "'");
    apply_setting(cfg, key, value, line_no);
    lines.emplace(std::string(key), line_no);
  }
  validate_keys(cfg, lines);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(0, path + ": " + e.what());
  }
}

void validate(const RunConfig& cfg) { validate_keys(cfg, {}); }

EvoDpoConfig RunConfig::evodpo() const {
  EvoDpoConfig c;
  c.arms = arms;
  c.dim = dim;
  c.horizon = horizon;
  c.context_mode = contexts;
  c.drift = drift;
  c.tv_budget = tv_budget;
  c.kappa = kappa;
  c.lambda = lambda;
  c.phase = phase;
  c.gate_mode = gate;
  c.reference = mode == RunMode::kFixedRef ? ReferenceMode::kFixed : ReferenceMode::kEvolving;
  c.scorer = scorer;
  c.max_phases = max_phases;
  return c;
}

BanditConfig RunConfig::reward_bandit() const {
  BanditConfig c;
  c.arms = arms;
  c.dim = dim;
  c.horizon = horizon;
  c.context_mode = contexts;
  c.drift = drift;
  c.tv_budget = tv_budget;
  c.noise_scale = noise;
  return c;
}

AtlasConfig RunConfig::atlas() const {
  AtlasConfig c;
  c.rounds = rounds;
  c.islands = islands;
  c.phase = phase;
  c.top_s = top_s;
  c.max_phases = max_phases;
  c.fine_tuning = fine_tuning;
  c.dataset_phases = dataset_phases;
  c.lambda = lambda;
  c.island.candidates_per_step = candidates_per_step;
  c.episode = reward_bandit();
  c.episode.horizon = episode_horizon;
  c.episodes = episodes;
  return c;
}

}  // namespace evodpo
