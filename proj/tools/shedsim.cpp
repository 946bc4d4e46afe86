// shedsim: command-line front end for the load-shedding simulator.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lshed/errors.hpp"
#include "lshed/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

using lshed::scenario::ScenarioConfig;

struct CommonFlags {
  std::string config;
  std::optional<std::int64_t> max_rounds;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("config", f.config, "scenario JSON file")->required();
  cmd->add_option("--max-rounds", f.max_rounds, "override run.max_rounds");
  cmd->add_option("--seed", f.seed, "override the scenario seed");
  cmd->add_flag("--quiet", f.quiet, "print nothing on success");
}

ScenarioConfig load(const CommonFlags& f) {
  ScenarioConfig c = lshed::scenario::load_scenario(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.max_rounds) {
    c.run.max_rounds = *f.max_rounds;
    c.run.min_rounds = std::min(c.run.min_rounds, c.run.max_rounds);
  }
  lshed::scenario::validate(c);
  return c;
}

void print(const CommonFlags& f, const std::string& text) {
  if (!f.quiet) std::cout << text << '\n';
}

int cmd_solve(const CommonFlags& f) {
  const ScenarioConfig c = load(f);
  print(f, lshed::scenario::to_json(lshed::scenario::solve_oracle(c)));
  return kExitOk;
}

int cmd_run(const CommonFlags& f, const std::string& trace_path, lshed::scenario::Mode expected) {
  const ScenarioConfig c = load(f);
  if (c.mode != expected) {
    throw lshed::ValidationError("config schema", expected == lshed::scenario::Mode::discrete
                                                      ? "this is a continuous scenario; use `continuous`"
                                                      : "this is a discrete scenario; use `run`");
  }
  const auto setup = lshed::scenario::build_setup(c);
  auto opts = lshed::scenario::build_run_options(c);
  opts.record_trace = !trace_path.empty();
  const auto trace = lshed::protocol::run_protocol(setup, opts);
  if (!trace_path.empty()) lshed::scenario::emit_trace(trace, trace_path);
  const auto report = lshed::scenario::summarize(c, trace);
  print(f, lshed::scenario::to_json(report));
  if (!report.converged) {
    std::cerr << "shedsim: no convergence within " << c.run.max_rounds << " rounds\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_check(const CommonFlags& f) {
  const ScenarioConfig c = load(f);
  const auto cert = lshed::scenario::certify_scenario(c);
  print(f, lshed::scenario::to_json(cert));
  if (!cert.all_pass()) {
    std::cerr << "shedsim: " << lshed::scenario::digest(cert) << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed priority-based load shedding simulator"};
  app.require_subcommand(1);

  CommonFlags solve_f, run_f, cont_f, check_f;
  std::string trace_path, cont_trace_path;

  add_common(app.add_subcommand("solve", "centralized oracle: z*, z_hat, shed set"), solve_f);
  auto* run = app.add_subcommand("run", "distributed run of a discrete scenario");
  add_common(run, run_f);
  run->add_option("--trace", trace_path, "write the per-round trace CSV here");
  auto* cont = app.add_subcommand("continuous", "continuous-load oracle and distributed run");
  add_common(cont, cont_f);
  cont->add_option("--trace", cont_trace_path, "write the per-round trace CSV here");
  add_common(app.add_subcommand("check", "assumption certificates for the scenario"), check_f);

  lshed::scenario::GenerateOptions gen;
  std::string out_path;
  auto* g = app.add_subcommand("gen", "generate a random discrete scenario");
  g->add_option("--regions", gen.regions, "number of regions")->required();
  g->add_option("--loads", gen.loads_per_region, "loads per region")->required();
  g->add_option("--seed", gen.seed, "generator seed")->required();
  g->add_option("-o,--output", out_path, "output JSON file")->required();
  g->add_option("--fraction", gen.required_fraction, "required shed as a fraction of total load");
  g->add_option("--power-lo", gen.power_lo, "smallest load power, GW");
  g->add_option("--power-hi", gen.power_hi, "largest load power, GW");
  g->add_option("--graph", gen.graph, "line, ring, complete or random")
      ->check(CLI::IsMember({"line", "ring", "complete", "random"}));
  g->add_option("--edge-probability", gen.edge_probability, "random graph edge probability");
  g->add_option("--window", gen.window, "connectivity window B");
  g->add_option("--estimator", gen.estimator, "exact_split or noisy_split")
      ->check(CLI::IsMember({"exact_split", "noisy_split"}));
  g->add_option("--step-scale", gen.step_scale, "eta(t) = s/(t+1)^q");
  g->add_option("--step-exponent", gen.step_exponent, "eta(t) = s/(t+1)^q");
  g->add_option("--min-rounds", gen.min_rounds, "rounds before the stopping rule may fire");
  g->add_option("--max-rounds", gen.max_rounds, "round limit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("solve")) return cmd_solve(solve_f);
    if (app.got_subcommand("run")) return cmd_run(run_f, trace_path, lshed::scenario::Mode::discrete);
    if (app.got_subcommand("continuous")) return cmd_run(cont_f, cont_trace_path, lshed::scenario::Mode::continuous);
    if (app.got_subcommand("check")) return cmd_check(check_f);
    if (app.got_subcommand("gen")) {
      lshed::scenario::save_scenario(lshed::scenario::generate_scenario(gen), out_path);
      return kExitOk;
    }
  } catch (const lshed::ParseError& e) {
    std::cerr << "shedsim: parse error at line " << e.line() << ", column " << e.column() << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const lshed::ValidationError& e) {
    std::cerr << "shedsim: validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const lshed::InfeasibleError& e) {
    std::cerr << "shedsim: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "shedsim: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
