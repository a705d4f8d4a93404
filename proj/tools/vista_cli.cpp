// vista: train, ablate and self-check the structured attention model.
//
//   vista run --config exp.cfg
//   vista ablate --config exp.cfg --axis rank --values 0,1,3,5,7,9 [--jobs 2]
//   vista check --suite oracle|grad|invariants
//   vista version
//
// VISTA_OUTPUT_ROOT overrides output_dir from the config.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "vista/checks.hpp"
#include "vista/config.hpp"
#include "vista/error.hpp"
#include "vista/experiment.hpp"

#ifndef VISTA_VERSION
#define VISTA_VERSION "0.3.0"
#endif

namespace {

void print_record(const vista::RunRecord& r) {
  std::cout << r.config_hash << "  " << vista::to_string(r.variant) << " T=" << r.rank
            << "  params=" << r.parameter_count << "  flops=" << r.flops
            << "  forward_ms=" << r.forward_ms;
  if (r.diverged) std::cout << "  DIVERGED (" << r.note << ")";
  std::cout << "\n";
  for (const auto& [k, v] : r.metrics.values) std::cout << "  " << k << " = " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured attention experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "train and evaluate one configuration");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

  std::string axis, values;
  std::size_t jobs = 1;
  auto* ablate = app.add_subcommand("ablate", "sweep one axis and write comparison files");
  ablate->add_option("--config", config_path, "base config file")
      ->required()
      ->check(CLI::ExistingFile);
  ablate->add_option("--axis", axis, "variant or rank")
      ->required()
      ->check(CLI::IsMember({"variant", "rank"}));
  ablate->add_option("--values", values, "comma separated list")->required();
  ablate->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

  std::string suite;
  std::uint64_t seed = vista::CheckOptions{}.seed;
  std::size_t instances = 0;
  double tolerance_scale = 1.0;
  auto* check = app.add_subcommand("check", "run a self-check suite");
  check->add_option("--suite", suite, "oracle, grad or invariants")
      ->required()
      ->check(CLI::IsMember({"oracle", "grad", "invariants"}));
  check->add_option("--seed", seed, "base seed");
  check->add_option("--instances", instances, "instances per check (0 = default)");
  check->add_option("--tolerance-scale", tolerance_scale,
                    "multiply pass tolerances (0 forces failure on any error)")
      ->check(CLI::NonNegativeNumber);

  auto* version = app.add_subcommand("version", "print version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*version) {
      std::cout << "vista " << VISTA_VERSION << "\n";
      return 0;
    }
    if (*run) {
      const auto cfg = vista::parse_config(config_path);
      const auto r = vista::run_experiment(cfg);
      print_record(r);
      std::cout << "output: " << (vista::output_root(cfg) / vista::run_name(cfg)).string()
                << "\n";
      return r.diverged ? 1 : 0;
    }
    if (*ablate) {
      const auto cfg = vista::parse_config(config_path);
      const auto res = vista::run_ablation(cfg, vista::parse_axis(axis),
                                           vista::split_list(values), jobs);
      for (const auto& r : res.records) print_record(r);
      std::cout << "comparison: " << res.csv_path.string() << "\n"
                << "plot data:  " << res.dat_path.string() << "\n"
                << "plot:       " << res.svg_path.string() << "\n";
      return 0;
    }
    if (*check) {
      vista::CheckOptions opts;
      opts.seed = seed;
      opts.instances = instances;
      opts.tolerance_scale = tolerance_scale;
      const auto results = vista::run_check_suite(suite, std::cout, opts);
      return vista::all_passed(results) ? 0 : 1;
    }
  } catch (const vista::Error& e) {
    std::cerr << "error [" << vista::to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
