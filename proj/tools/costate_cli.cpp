/*
 Copyright 2026 The costate-games Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "costate/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace costate;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "run";
  bool full = false;
  std::optional<int> threads;
};

RunConfig load(const Globals& g) {
  RunConfig rc = load_run_config(g.config, g.full);
  if (g.seed) {
    rc.sampler.seed = *g.seed;
    rc.plan.base_seed = *g.seed;
  }
  if (g.threads) rc.threads = *g.threads;
  return rc;
}

void print_report(const EvalReport& r) {
  std::printf("collisions: %d / %d (%.2f%%)\n", r.collisions, r.cases, r.collision_percentage);
  std::printf("co-state abs error: mean %.6g, std %.6g over %d records\n", r.costate_error_mean,
              r.costate_error_std, r.error_records);
}

void print_comparison(const ComparisonReport& rep) {
  for (const auto& row : rep.rows) {
    std::printf("size %d:", row.size);
    for (const auto& [v, c] : row.collisions) std::printf("  %s %.2f%% (n=%zu)", v.c_str(), mean(c), c.size());
    std::printf("  p(static<value)=%.4g  p(active<static)=%.4g\n", row.p_value_vs_static,
                row.p_static_vs_active);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning equilibrium co-states for a two-player intersection game"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Overrides the sampler and plan base seed");
  app.add_option("--out-dir", g.out_dir, "Run directory")->capture_default_str();
  app.add_flag("--full", g.full, "Full-scale dataset counts, sizes and repeats");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "Solve and write the train, acquisition, test and validation sets");

  std::string variant = "costate_static";
  int size = 50;
  std::optional<std::uint64_t> run_seed;
  auto* train = app.add_subcommand("train", "Train one model variant on a seeded subset of the train pool");
  train->add_option("--variant", variant)->check(CLI::IsMember({"value", "costate_static", "costate_active"}));
  train->add_option("--size", size, "Number of training initial states")->required();
  train->add_option("--run-seed", run_seed, "Seed of this run (default: plan base seed)");

  auto* active = app.add_subcommand("active-train", "Train the co-state network with active learning");
  active->add_option("--size", size, "Total number of training initial states")->required();
  active->add_option("--run-seed", run_seed, "Seed of this run (default: plan base seed)");

  std::string checkpoint;
  std::string prefix;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test set");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--prefix", prefix, "Output path prefix (default: next to the checkpoint)");

  std::string controller = "costate_net";
  std::vector<double> x0v;
  double t0 = 0.0;
  std::string traj = "trajectory.csv";
  auto* sim = app.add_subcommand("simulate", "Closed-loop rollout from one initial state");
  sim->add_option("--controller", controller)
      ->check(CLI::IsMember({"costate_net", "value_net_grad", "oracle_bvp", "analytic_b0", "zero"}));
  sim->add_option("--checkpoint", checkpoint)->check(CLI::ExistingFile);
  sim->add_option("--x0", x0v, "d1 v1 d2 v2")->expected(4)->required();
  sim->add_option("--t0", t0);
  sim->add_option("--output", traj)->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Aggregate runs and write the significance report");
  auto* plan = app.add_subcommand("run-plan", "Train every plan cell, then compare");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig rc = load(g);
    const std::uint64_t seed = run_seed.value_or(rc.plan.base_seed);
    if (*gen) {
      const GenDataSummary s = cmd_gen_data(rc, g.out_dir);
      for (const auto& [name, n] : s.records) {
        std::printf("%-12s %7d records, %d skipped\n", name.c_str(), n, s.skipped.at(name));
      }
      std::printf("test states dropped for colliding equilibria: %d\n", s.test_collision_filtered);
    } else if (*train) {
      const TrainOutcome o = cmd_train(rc, variant, size, seed, g.out_dir);
      std::printf("%s\n", o.run_dir.c_str());
      print_report(o.report);
    } else if (*active) {
      const TrainOutcome o = cmd_train(rc, "costate_active", size, seed, g.out_dir);
      std::printf("%s\n", o.run_dir.c_str());
      print_report(o.report);
    } else if (*eval) {
      if (prefix.empty()) prefix = checkpoint.substr(0, checkpoint.find_last_of('/') + 1) + "eval_";
      print_report(cmd_evaluate(rc, checkpoint, g.out_dir, prefix));
    } else if (*sim) {
      const JointState x{{x0v[0], x0v[1]}, {x0v[2], x0v[3]}, t0};
      const SimResult r = cmd_simulate(rc, controller, checkpoint, x, traj);
      const JointState e = r.terminal();
      std::printf("collided: %s\nterminal: d1 %.4f v1 %.4f d2 %.4f v2 %.4f\n", r.collided ? "yes" : "no", e.p1.d,
                  e.p1.v, e.p2.d, e.p2.v);
    } else if (*compare) {
      print_comparison(cmd_compare(g.out_dir));
    } else if (*plan) {
      print_comparison(run_plan(rc, g.out_dir));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
