// dpbm: run experiments, oracle suites and trace inspection.

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "dpbm/async_sim.hpp"
#include "dpbm/experiment.hpp"
#include "dpbm/metrics.hpp"
#include "dpbm/verify.hpp"

namespace {

using nlohmann::json;

int cmd_run(const std::string& path) {
  try {
    const dpbm::ExperimentConfig cfg = dpbm::load_config(path);
    const dpbm::ExperimentResult res = dpbm::run_experiment(cfg, true);
    json out = res.summary;
    out["status"] = "ok";
    out["output_dir"] = res.output_dir;
    std::cout << out.dump(2) << '\n';
    return 0;
  } catch (const dpbm::ConfigError& e) {
    json out = {{"status", "config_error"}, {"errors", e.fields()}};
    std::cerr << out.dump(2) << '\n';
    return 2;
  } catch (const std::exception& e) {
    json out = {{"status", "error"}, {"message", e.what()}};
    std::cerr << out.dump(2) << '\n';
    return 1;
  }
}

int cmd_verify(const std::string& suite) {
  try {
    const dpbm::SuiteReport rep = dpbm::run_suite(suite);
    std::cout << rep.to_json().dump(2) << '\n';
    return rep.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"status", "error"}, {"message", e.what()}}.dump(2) << '\n';
    return 1;
  }
}

int cmd_info(const std::string& path) {
  try {
    const dpbm::Trace trace = dpbm::read_trace_binary(path);
    json out = {{"nodes", trace.nodes}, {"dim", trace.dim}, {"snapshots", trace.snapshots.size()}};
    if (!trace.snapshots.empty()) {
      out["first_iteration"] = trace.iterations.front();
      out["last_iteration"] = trace.iterations.back();
      out["final_consensus_error"] = dpbm::consensus_error(trace.final());
      const dpbm::Vector xbar = dpbm::average_iterate(trace.final());
      out["final_average"] = std::vector<double>(xbar.data(), xbar.data() + xbar.size());
    }
    std::cout << out.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << json{{"status", "error"}, {"message", e.what()}}.dump(2) << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized proximal bundle method experiments"};
  app.require_subcommand(1);

  std::string config_path, suite, trace_path;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  auto* verify = app.add_subcommand("verify", "Run an oracle/property suite");
  verify->add_option("suite", suite, "subproblem | minorant | reduction | schedule")
      ->required()
      ->check(CLI::IsMember({"subproblem", "minorant", "reduction", "schedule"}));
  auto* info = app.add_subcommand("info", "Summarize a binary trace file");
  info->add_option("trace", trace_path, "trace.bin")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  if (*run) return cmd_run(config_path);
  if (*verify) return cmd_verify(suite);
  return cmd_info(trace_path);
}
