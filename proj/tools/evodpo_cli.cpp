// Command-line front end: run, sweep, verify, report.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evodpo/runner.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::string mode;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--seed", o.seed, "single seed");
  cmd->add_option("--seeds", o.seeds, "inclusive seed range N..M");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--mode", o.mode, "evodpo, fixed-ref, atlas, reward-bandit, verify");
  cmd->add_option("--set", o.overrides, "extra key=value setting (repeatable)");
}

evodpo::RunConfig resolve(const CommonOptions& o) {
  evodpo::RunConfig cfg = o.config.empty() ? evodpo::RunConfig{} : evodpo::load_config(o.config);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    evodpo::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.mode.empty()) cfg.mode = evodpo::parse_mode(o.mode);
  if (!o.seeds.empty()) cfg.seeds = evodpo::parse_seed_range(o.seeds);
  if (o.seed) cfg.seeds = {*o.seed, *o.seed};
  if (!o.out.empty()) cfg.out = o.out;
  evodpo::validate(cfg);
  return cfg;
}

void print_summary(const evodpo::RunSummary& s) {
  std::printf("%s: %zu seed(s), %s mean %s sem %s\n", s.mode.c_str(), s.seeds.size(),
              evodpo::metric_name(s.mode).c_str(), evodpo::format_real(s.mean).c_str(),
              evodpo::format_real(s.sem).c_str());
}

int run_or_sweep(const CommonOptions& o, evodpo::Execution exec) {
  const evodpo::RunConfig cfg = resolve(o);
  if (cfg.mode == evodpo::RunMode::kVerify) {
    const evodpo::VerifyOutputs v = evodpo::execute_verify(cfg, exec);
    std::fputs(evodpo::lemma_csv(v.lemmas).c_str(), stdout);
    return v.all_passed() ? 0 : 2;
  }
  const evodpo::RunOutputs out = evodpo::execute_run(cfg, exec);
  print_summary(out.summary);
  for (const auto& f : out.files) std::printf("wrote %s\n", f.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drifting-preference simulator for evolving-reference DPO"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, verify_opts;
  CLI::App* run = app.add_subcommand("run", "run the configured mode over its seeds");
  add_common(run, run_opts);
  CLI::App* sweep = app.add_subcommand("sweep", "run seeds concurrently");
  add_common(sweep, sweep_opts);
  CLI::App* verify = app.add_subcommand("verify", "Monte-Carlo lemma checks");
  add_common(verify, verify_opts);
  bool scaling = false;
  verify->add_flag("--scaling", scaling, "also run the regret-scaling grid (minutes)");

  CLI::App* report = app.add_subcommand("report", "aggregate run summaries into a table");
  std::vector<std::string> summaries;
  std::string report_out;
  report->add_option("summaries", summaries, "summary JSON files")->required();
  report->add_option("--out", report_out, "write the table to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_or_sweep(run_opts, evodpo::Execution::kSerial);
    if (sweep->parsed()) return run_or_sweep(sweep_opts, evodpo::Execution::kParallel);
    if (verify->parsed()) {
      verify_opts.mode = "verify";
      if (scaling) verify_opts.overrides.push_back("verify_scaling=1");
      return run_or_sweep(verify_opts, evodpo::Execution::kParallel);
    }
    if (report->parsed()) {
      const std::vector<std::filesystem::path> paths(summaries.begin(), summaries.end());
      const std::string table = evodpo::report_from_files(paths);
      if (report_out.empty()) {
        std::fputs(table.c_str(), stdout);
      } else {
        evodpo::write_text(report_out, table);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
