#pragma once

// Orchestration: validate, run, and persist. Output files are written only after the experiment
// completes, so a configuration error leaves the output directory untouched.
//
//   records.csv    one VerificationRecord per row, deterministic for a given config and seed
//   summary.json   experiment results and pass counts, deterministic as well
//   manifest.json  config echo, version, wall clock and the failure list

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>

#include "hlg/app/config.hpp"
#include "hlg/app/experiments.hpp"
#include "hlg/geometry.hpp"

namespace hlg::app {

inline constexpr const char * kVersion = "1.0.0";

enum ExitCode : int
{
  kAllPass = 0,
  kVerificationFailed = 1,
  kConfigError = 2,
};

struct RunOutcome
{
  ExperimentResult result;
  json summary;
  json manifest;
  std::size_t passed{0};
  std::size_t failed{0};
  double seconds{0.0};

  int exit_code() const { return failed == 0 ? kAllPass : kVerificationFailed; }
};

inline RunContext make_context(const RunConfig & cfg)
{
  RunContext ctx;
  ctx.config = cfg;
  ctx.preset = make_preset(cfg.preset);
  ctx.label = to_string(cfg.preset);
  ctx.workers = cfg.workers;
  for (int m : cfg.ranks) { ctx.preset.form.check_rank(m); }
  return ctx;
}

/// Runs the experiment in memory. Throws ConfigError on schema or preset problems.
inline RunOutcome execute(const RunConfig & cfg)
{
  if (cfg.experiment.empty()) { throw ConfigError("no experiment selected"); }
  const auto start = std::chrono::steady_clock::now();
  const RunContext ctx = make_context(cfg);
  ParamReader params(cfg.params, "params");
  RunOutcome out;
  out.result = run_experiment(ctx, params);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json failures = json::array();
  for (std::size_t k = 0; k < out.result.records.size(); ++k) {
    const auto & r = out.result.records[k];
    if (r.pass) {
      ++out.passed;
    } else {
      ++out.failed;
      failures.push_back({{"index", k}, {"record_id", r.record_id}, {"margin", r.margin}, {"tolerance", r.tolerance}});
    }
  }
  out.summary = {{"experiment", cfg.experiment},
                 {"preset", ctx.label},
                 {"records", out.result.records.size()},
                 {"passed", out.passed},
                 {"failed", out.failed},
                 {"all_pass", out.failed == 0},
                 {"results", out.result.summary}};

  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  out.manifest = {{"config", config_to_json(cfg)},
                  {"version", kVersion},
                  {"finished_at", stamp},
                  {"wall_clock_seconds", out.seconds},
                  {"records", out.result.records.size()},
                  {"passed", out.passed},
                  {"failed", out.failed},
                  {"failures", failures}};
  return out;
}

inline void write_text(const std::filesystem::path & path, const std::string & text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) { throw std::runtime_error("cannot write " + path.string()); }
  f << text;
}

inline void write_outputs(const RunOutcome & out, const std::filesystem::path & dir)
{
  std::filesystem::create_directories(dir);
  write_text(dir / "records.csv", records_to_csv(out.result.records));
  write_text(dir / "summary.json", out.summary.dump(2) + "\n");
  write_text(dir / "manifest.json", out.manifest.dump(2) + "\n");
}

}  // namespace hlg::app
