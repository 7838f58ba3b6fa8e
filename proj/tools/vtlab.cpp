#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vtlab/harness.hpp"
#include "vtlab/kernels.hpp"

namespace {

int cmd_run(const std::string& config_path, long long seed_override,
            const std::string& variant_override,
            const std::string& out_override) {
  vtlab::harness::ExperimentConfig cfg;
  try {
    cfg = vtlab::harness::load_config(config_path);
    if (seed_override >= 0)
      cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
    if (!variant_override.empty()) {
      const auto v = vtlab::harness::variant_from_name(variant_override);
      if (!v) {
        std::cerr << "unknown variant '" << variant_override << "'\n";
        return 2;
      }
      cfg.variant = *v;
    }
    if (!out_override.empty()) cfg.output.path = out_override;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    const vtlab::harness::ResultsRecord record =
        vtlab::harness::run_experiment(cfg);
    std::ofstream out(cfg.output.path);
    if (!out) {
      std::cerr << "cannot write " << cfg.output.path << "\n";
      return 1;
    }
    vtlab::harness::write_results(out, record);
    std::cout << "variant " << vtlab::harness::variant_name(record.variant)
              << ", " << record.per_seed.size() << " seed(s)\n"
              << "  mean ASR      " << record.aggregates.overall_asr.mean
              << "\n"
              << "  mean accuracy " << record.aggregates.accuracy.mean << "\n"
              << "  anomaly ratio " << record.aggregates.anomaly_ratio.mean
              << "\n"
              << "results written to " << cfg.output.path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 1;
  }
}

int cmd_inspect(const std::string& results_path) {
  try {
    std::cout << vtlab::harness::inspect_results(results_path);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "inspect failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtlab: detector-enhanced VFL inference and the two-stage "
               "targeted-label attack"};
  app.require_subcommand(1);

  std::string config_path, out_override, variant_override, results_path;
  long long seed_override = -1;

  CLI::App* run = app.add_subcommand("run", "run an experiment from a config");
  run->add_option("--config", config_path, "config file path")->required();
  run->add_option("--seed-override", seed_override,
                  "run only this seed instead of the configured list");
  run->add_option("--variant", variant_override, "override the attack variant");
  run->add_option("--out", out_override, "override the results output path");

  CLI::App* inspect =
      app.add_subcommand("inspect", "pretty-print a results file");
  inspect->add_option("--results", results_path, "results file path")
      ->required();

  CLI::App* backend =
      app.add_subcommand("backend", "print the active compute backend");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(config_path, seed_override, variant_override, out_override);
  if (inspect->parsed()) return cmd_inspect(results_path);
  if (backend->parsed()) {
    std::cout << vtlab::kern::backend_name(vtlab::kern::active_backend())
              << "\n";
    return 0;
  }
  return 2;
}
