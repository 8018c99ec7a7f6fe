#include "dodrom/pipeline/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace dodrom;
using namespace dodrom::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order models with POD and deep orthogonal decomposition"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "Run configuration (INI)")->check(CLI::ExistingFile);
  app.footer(std::string("Outputs go to paths.output, or to $") + kOutputDirEnv +
             " when set.\nExit codes: 0 ok, 2 config error, 3 data error, 4 training failure.");

  auto* generate = app.add_subcommand("generate", "Simulate the training corpus and the test tuples");
  auto* pod = app.add_subcommand("pod", "Pre-reduction basis of N_A POD modes");
  auto* train_dod = app.add_subcommand("train-dod", "Train and freeze the DOD");

  auto* train_rom = app.add_subcommand("train-rom", "Train one ROM variant");
  std::string variant;
  train_rom->add_option("--variant", variant, "pod-dl-rom | dod-dfnn | dod-dl-rom")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Relative error, forward time and speedup of trained ROMs");
  std::vector<std::string> eval_variants;
  bool no_timing = false;
  evaluate->add_option("--variant", eval_variants, "Variants to evaluate (default: all trained)");
  evaluate->add_flag("--no-timing", no_timing, "Skip timings (byte-identical reports across reruns)");

  auto* sweep = app.add_subcommand("sweep", "Active weights versus error over the preset ladder");
  SweepOptions sweep_opt;
  sweep->add_flag("--parallel", sweep_opt.parallel, "Train cells concurrently; timing columns stay empty");
  sweep->add_option("--threads", sweep_opt.threads, "Workers for --parallel")->check(CLI::PositiveNumber);

  auto* knw = app.add_subcommand("knw", "Global and worst-slice relative eigenvalue tails");
  Index n_max = 0;
  knw->add_option("--n-max", n_max, "Largest n (default: min(N_A, N_s2))");

  auto* exporter = app.add_subcommand("export", "Convert a binary store to CSV");
  std::string input, output;
  exporter->add_option("input", input, "Matrix store (.bin) or network checkpoint (.net)")->required();
  exporter->add_option("output", output, "CSV file")->required();

  // CLI11 reports its own usage errors; they count as config errors.
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (exporter->parsed()) {
    return run_command([&] { return cmd_export(input, output); }, std::cout, std::cerr);
  }
  if (config_path.empty()) {
    std::cerr << "config error: --config is required for " << app.get_subcommands().front()->get_name() << "\n";
    return kExitConfig;
  }

  return run_command(
      [&]() -> std::string {
        const RunConfig cfg = load_config(config_path);
        const Layout layout{output_dir(cfg)};
        if (generate->parsed()) return cmd_generate(cfg, layout);
        if (pod->parsed()) return cmd_pod(cfg, layout);
        if (train_dod->parsed()) return cmd_train_dod(cfg, layout);
        if (train_rom->parsed()) {
          roms::Variant v;
          try {
            v = roms::parse_variant(variant);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
          return cmd_train_rom(cfg, layout, v);
        }
        if (evaluate->parsed()) {
          EvaluateOptions opt;
          opt.timing = !no_timing;
          try {
            for (const auto& name : eval_variants) opt.variants.push_back(roms::parse_variant(name));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
          return cmd_evaluate(cfg, layout, opt);
        }
        if (sweep->parsed()) return cmd_sweep(cfg, layout, sweep_opt);
        return cmd_knw(cfg, layout, n_max);
      },
      std::cout, std::cerr);
}
