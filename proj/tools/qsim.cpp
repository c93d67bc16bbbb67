// Copyright (c) the qsim authors.
// Licensed under the Apache 2.0 License.
//
// Scenario runner: executes declarative protocol scenarios in the
// deterministic network simulator, writes traces, and sweeps seeds.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qsim/scenario.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed,
            const std::string& trace_dir, bool force) {
  auto scenario = qsim::scenario::load_scenario(file);
  auto output = qsim::scenario::run_scenario(scenario, seed);

  fs::path dir = trace_dir.empty() ? fs::path(".") : fs::path(trace_dir);
  fs::create_directories(dir);
  fs::path trace_path =
      dir / (output.report.scenario + "-" +
             std::to_string(output.report.seed) + ".trace");
  if (fs::exists(trace_path) && !force) {
    std::cerr << "refusing to overwrite " << trace_path.string()
              << " (pass --force)\n";
    return 2;
  }
  std::ofstream out(trace_path, std::ios::binary);
  out << output.trace_bytes;
  out.close();

  std::cout << output.report.summary() << "\n";
  std::cout << "trace: " << trace_path.string() << "\n";
  return output.report.passed() ? 0 : 1;
}

int cmd_sweep(const std::string& file, const std::string& seeds) {
  auto split = seeds.find("..");
  if (split == std::string::npos) {
    std::cerr << "--seeds expects a range like 0..99\n";
    return 2;
  }
  std::uint64_t first = std::stoull(seeds.substr(0, split));
  std::uint64_t last = std::stoull(seeds.substr(split + 2));
  auto scenario = qsim::scenario::load_scenario(file);
  auto report = qsim::scenario::sweep(scenario, first, last);

  std::cout << scenario.name << " seeds " << first << ".." << last << ": "
            << report.runs << " runs, pass rate " << report.pass_rate
            << ", mean messages " << report.mean_messages
            << ", mean communication steps " << report.mean_steps << "\n";
  if (!report.failing_seeds.empty()) {
    std::cout << "failing seeds:";
    for (auto s : report.failing_seeds) std::cout << " " << s;
    std::cout << "\n";
  }
  return report.failing_seeds.empty() ? 0 : 1;
}

int cmd_explain(const std::string& protocol) {
  std::cout << qsim::scenario::explain(protocol);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic distributed-protocol simulator"};
  app.require_subcommand(1);

  std::string file, trace_dir, seeds, protocol;
  std::uint64_t seed_value = 0;
  bool force = false;

  auto* run = app.add_subcommand("run", "run one scenario and write its trace");
  run->add_option("file", file, "scenario file")->required();
  auto* seed_opt = run->add_option("--seed", seed_value, "override the seed");
  run->add_option("--trace-dir", trace_dir, "directory for trace output");
  run->add_flag("--force", force, "overwrite an existing trace file");

  auto* sweep = app.add_subcommand("sweep", "run a scenario across many seeds");
  sweep->add_option("file", file, "scenario file")->required();
  sweep->add_option("--seeds", seeds, "inclusive seed range, e.g. 0..99")
      ->required();

  auto* explain =
      app.add_subcommand("explain", "print a protocol's parameters and checks");
  explain->add_option("protocol", protocol, "protocol name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(file,
                     seed_opt->count() ? std::optional<std::uint64_t>(seed_value)
                                       : std::nullopt,
                     trace_dir, force);
    if (sweep->parsed()) return cmd_sweep(file, seeds);
    if (explain->parsed()) return cmd_explain(protocol);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 2;
}
