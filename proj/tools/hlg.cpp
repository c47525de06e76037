// hlg: command-line front end for the projection-group verification suites.
//
//   hlg <subcommand> [--config PATH] [--seed U64] [--out DIR] [--workers N]
//
// Exit status: 0 when every record passes, 1 when a verification fails or a run
// aborts, 2 on configuration errors (nothing is written in that case).

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hlg/app/run.hpp"
#include "hlg/curvature.hpp"
#include "hlg/parallel.hpp"
#include "hlg/presets.hpp"

namespace {

using hlg::app::json;

struct GlobalFlags
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out{"results"};
  std::optional<int> workers;
};

void add_flags(CLI::App * cmd, GlobalFlags & flags)
{
  cmd->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "master seed (overrides the config)");
  cmd->add_option("--out", flags.out, "output directory")->capture_default_str();
  cmd->add_option("--workers", flags.workers, "worker threads (overrides config and HLG_WORKERS)")->check(CLI::PositiveNumber);
}

json preset_catalog()
{
  json out = json::array();
  for (const auto & spec : hlg::catalog_specs()) {
    const auto preset = hlg::make_preset(spec);
    const int n = preset.form.horizontal_dim();
    const auto c = hlg::curvature_constants(preset.form, n);
    out.push_back({{"name", spec.name},
                   {"params", spec.params},
                   {"label", hlg::to_string(spec)},
                   {"horizontal_dim", n},
                   {"vertical_dim", preset.form.vertical_dim()},
                   {"hs_norm_sq", c.hs_norm_sq},
                   {"rho2", c.rho2},
                   {"harnack_coeff", c.harnack_coeff},
                   {"description", preset.description}});
  }
  return out;
}

int list_presets(const GlobalFlags & flags, bool out_given)
{
  const json catalog = preset_catalog();
  std::printf("%-26s %4s %4s %12s %12s %14s\n", "preset", "n", "d", "hs_norm_sq", "rho2", "harnack_coeff");
  for (const auto & p : catalog) {
    std::printf("%-26s %4d %4d %12.6g %12.6g %14.6g\n", p["label"].get<std::string>().c_str(), p["horizontal_dim"].get<int>(),
                p["vertical_dim"].get<int>(), p["hs_norm_sq"].get<double>(), p["rho2"].get<double>(),
                p["harnack_coeff"].get<double>());
  }
  if (out_given) {
    std::filesystem::create_directories(flags.out);
    hlg::app::write_text(std::filesystem::path(flags.out) / "presets.json", catalog.dump(2) + "\n");
  }
  return 0;
}

int run_subcommand(const std::string & experiment, const GlobalFlags & flags)
{
  hlg::app::RunConfig cfg;
  try {
    const json doc = flags.config.empty() ? json::object() : hlg::app::load_json_file(flags.config);
    cfg = hlg::app::parse_config(doc);
    if (!cfg.experiment.empty() && cfg.experiment != experiment) {
      throw hlg::ConfigError("config names experiment '" + cfg.experiment + "' but the subcommand is '" + experiment + "'");
    }
    cfg.experiment = experiment;
    if (flags.seed) { cfg.seed = *flags.seed; }
    const bool config_sets_workers = doc.is_object() && doc.contains("workers");
    cfg.workers = flags.workers ? *flags.workers : (config_sets_workers ? cfg.workers : hlg::default_workers());
  } catch (const hlg::ConfigError & e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return hlg::app::kConfigError;
  }

  hlg::app::RunOutcome outcome;
  try {
    outcome = hlg::app::execute(cfg);
  } catch (const hlg::ConfigError & e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return hlg::app::kConfigError;
  } catch (const hlg::HormanderError & e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return hlg::app::kConfigError;
  } catch (const std::exception & e) {
    std::cerr << "run aborted: " << e.what() << "\n";
    return hlg::app::kVerificationFailed;
  }

  hlg::app::write_outputs(outcome, flags.out);
  std::printf("%s on %s: %zu records, %zu passed, %zu failed (%.1f s) -> %s\n", experiment.c_str(),
              outcome.summary["preset"].get<std::string>().c_str(), outcome.result.records.size(), outcome.passed,
              outcome.failed, outcome.seconds, flags.out.c_str());
  for (const auto & f : outcome.manifest["failures"]) {
    std::printf("  FAIL #%zu %s margin %.6g tolerance %.6g\n", f["index"].get<std::size_t>(),
                f["record_id"].get<std::string>().c_str(), f["margin"].get<double>(), f["tolerance"].get<double>());
  }
  return outcome.exit_code();
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Verification suites for step-2 projection groups: curvature constants, Carnot-Caratheodory "
               "distances, Brownian motion and heat-semigroup inequalities"};
  app.require_subcommand(1);
  GlobalFlags flags;

  std::string chosen;
  for (const auto & name : hlg::app::experiment_names()) {
    auto * cmd = app.add_subcommand(name, "run the '" + name + "' experiment");
    add_flags(cmd, flags);
    cmd->callback([&chosen, name] { chosen = name; });
  }
  auto * list = app.add_subcommand("list-presets", "print the preset catalog with dimensions and constants");
  add_flags(list, flags);
  list->callback([&chosen] { chosen = "list-presets"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return hlg::app::kConfigError;
  }

  if (chosen == "list-presets") { return list_presets(flags, list->count("--out") > 0); }
  return run_subcommand(chosen, flags);
}
