#include "evodpo/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace evodpo {

namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ledger_csv(const RegretLedger& ledger) {
  std::string out(kLedgerHeader);
  out += '\n';
  for (const LedgerRow& r : ledger.rows()) {
    out += std::to_string(r.t) + ',' + std::to_string(r.phase) + ',' + format_real(r.bias) +
           ',' + format_real(r.error) + ',' + format_real(r.regret_step) + ',' +
           format_real(r.regret_cum) + ',' + std::to_string(r.oracle_arm) + ',' +
           (r.switched ? "1" : "0") + '\n';
  }
  return out;
}

std::string phases_csv(std::span<const PhaseReport> phases) {
  std::string out(kPhaseHeader);
  out += '\n';
  for (const PhaseReport& p : phases) {
    out += std::to_string(p.k) + ',' + std::to_string(p.n_pairs) + ',' + format_real(p.delta_S) +
           ',' + format_real(p.kl_hat) + ',' + (p.accepted ? "1" : "0") + ',' +
           format_real(p.beta) + ',' + format_real(p.eps_s) + ',' + format_real(p.delta_H) + '\n';
  }
  return out;
}

std::string rounds_csv(std::span<const RoundRecord> rounds) {
  std::string out(kRoundHeader);
  out += '\n';
  for (const RoundRecord& r : rounds) {
    out += std::to_string(r.round) + ',' + format_real(r.best_score) + ',' +
           format_real(r.mean_score) + ',' + format_real(r.threshold) + ',' +
           std::to_string(r.coverage) + ',' + (r.phase_attempted ? "1" : "0") + '\n';
  }
  return out;
}

std::string lemma_csv(std::span<const LemmaReport> reports) {
  std::string out(kLemmaHeader);
  out += '\n';
  for (const LemmaReport& r : reports) {
    out += r.lemma + ',' + std::to_string(r.trials) + ',' + std::to_string(r.violations) + ',' +
           std::to_string(r.excluded) + ',' + format_real(r.violation_rate()) + ',' +
           format_real(r.allowed_rate()) + ',' + format_real(r.max_slack_ratio) + ',' +
           (r.passed() ? "1" : "0") + '\n';
  }
  return out;
}

std::string lemma_json(std::span<const LemmaReport> reports) {
  json arr = json::array();
  for (const LemmaReport& r : reports) {
    json constants = json::object();
    for (const auto& [k, v] : r.constants) constants[k] = v;
    arr.push_back({{"lemma", r.lemma},
                   {"trials", r.trials},
                   {"violations", r.violations},
                   {"excluded", r.excluded},
                   {"violation_rate", r.violation_rate()},
                   {"allowed_rate", r.allowed_rate()},
                   {"max_slack_ratio", r.max_slack_ratio},
                   {"delta", r.delta},
                   {"passed", r.passed()},
                   {"constants", constants}});
  }
  return arr.dump(2) + '\n';
}

std::string scaling_json(const ScalingReport& r) {
  json j = {{"horizons", r.horizons},
            {"evolving_regret", r.evolving_regret},
            {"fixed_regret", r.fixed_regret},
            {"evolving_bias", r.evolving_bias},
            {"fixed_bias", r.fixed_bias},
            {"evolving_exponent", r.evolving_exponent},
            {"fixed_exponent", r.fixed_exponent},
            {"evolving_slope", r.evolving_slope},
            {"fixed_slope", r.fixed_slope},
            {"evolving_bias_slope", r.evolving_bias_slope},
            {"fixed_bias_slope", r.fixed_bias_slope},
            {"paired_win_fraction", r.paired_win_fraction}};
  return j.dump(2) + '\n';
}

std::string summary_json(const RunSummary& s) {
  json j = {{"mode", s.mode},
            {"seeds", s.seeds},
            {"final_metric_per_seed", s.final_metric_per_seed},
            {"mean", s.mean},
            {"sem", s.sem},
            {"slope_exponent", optional_number(s.slope_exponent)},
            {"accept_rate", optional_number(s.accept_rate)}};
  return j.dump(2) + '\n';
}

RunSummary parse_summary(std::string_view text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source + ": not valid JSON (" + e.what() + ")");
  }
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(source + ": summary schema mismatch: " + what);
  };
  if (!j.is_object()) fail("top level is not an object");
  for (const char* key : {"mode", "seeds", "final_metric_per_seed", "mean", "sem",
                          "slope_exponent", "accept_rate"}) {
    if (!j.contains(key)) fail(std::string("missing key '") + key + "'");
  }
  RunSummary s;
  try {
    s.mode = j.at("mode").get<std::string>();
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.final_metric_per_seed = j.at("final_metric_per_seed").get<std::vector<double>>();
    s.mean = j.at("mean").get<double>();
    s.sem = j.at("sem").get<double>();
    if (!j.at("slope_exponent").is_null()) s.slope_exponent = j.at("slope_exponent").get<double>();
    if (!j.at("accept_rate").is_null()) s.accept_rate = j.at("accept_rate").get<double>();
  } catch (const json::exception& e) {
    fail(e.what());
  }
  if (s.seeds.size() != s.final_metric_per_seed.size()) fail("seeds and finals differ in length");
  return s;
}

std::string metric_name(std::string_view mode) {
  if (mode == "evodpo" || mode == "fixed-ref") return "final_regret";
  if (mode == "reward-bandit" || mode == "atlas") return "final_nmr";
  return "final_metric";
}

std::string comparison_table_csv(std::span<const RunSummary> summaries) {
  if (summaries.empty()) throw std::invalid_argument("report: need at least one summary");
  std::string out(kTableHeader);
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const RunSummary& s : summaries) {
    out += s.mode + ',' + metric_name(s.mode) + ',' + std::to_string(s.seeds.size()) + ',' +
           format_real(s.mean) + ',' + format_real(s.sem) + ',' + opt(s.slope_exponent) + ',' +
           opt(s.accept_rate) + '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace evodpo
