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

// Study orchestration: dataset generation, training of the three model
// variants, evaluation, and the significance report.
//
// Run directory layout:
//   <out>/config.json
//   <out>/data/{train,acquisition,test,validation}.csv (+ .json sidecars)
//   <out>/runs/<variant>/size_<n>/seed_<s>/{checkpoint.json, curve.csv,
//       summary.json, cases.csv[, acquisition_log.csv]}
//   <out>/comparison.{csv,json}

#pragma once

#include "costate/closed_loop_sim.hpp"
#include "costate/config_io.hpp"
#include "costate/data_pipeline.hpp"
#include "costate/neural.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace costate {

inline constexpr const char* kCodeVersion = "0.1.0";

class InsufficientRepeats : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);

// One-sided Welch test of mean(a) < mean(b). Returns P(T <= t). Both
// variances zero: 0.5 for equal means, else 0 or 1.
double welch_one_sided(const std::vector<double>& a, const std::vector<double>& b);

struct DataPaths {
  std::string train, acquisition, test, validation;
  static DataPaths in(const std::string& out_dir);
};

struct GenDataSummary {
  std::map<std::string, int> records;
  std::map<std::string, int> skipped;
  int test_collision_filtered = 0;
};

// Solves and writes the four datasets. The test set keeps only initial
// states whose equilibrium trajectory avoids the hard collision box.
GenDataSummary cmd_gen_data(const RunConfig& rc, const std::string& out_dir);

struct TrainOutcome {
  std::string run_dir;
  EvalReport report;
  TrainHistory history;
  int train_solutions = 0;
};

std::string run_dir_for(const std::string& out_dir, const std::string& variant, int size,
                        std::uint64_t seed);

// Seeded subset of `size` train-pool initial states, in draw order.
std::vector<int> draw_subset(const Dataset& pool, int size, std::uint64_t seed);

// Actively acquired points for a given total size.
int active_budget(int size, const RunConfig& rc);

// variant: value, costate_static or costate_active.
TrainOutcome cmd_train(const RunConfig& rc, const std::string& variant, int size, std::uint64_t seed,
                       const std::string& out_dir);

// Re-evaluates a checkpoint on the test set.
EvalReport cmd_evaluate(const RunConfig& rc, const std::string& checkpoint, const std::string& out_dir,
                        const std::string& report_prefix);

// Closed-loop trajectory from one initial state, written as CSV.
SimResult cmd_simulate(const RunConfig& rc, const std::string& controller, const std::string& checkpoint,
                       const JointState& x0, const std::string& csv_path);

struct SizeRow {
  int size = 0;
  std::map<std::string, std::vector<double>> collisions;  // by variant, per repeat
  std::map<std::string, std::vector<double>> errors;
  double p_value_vs_static = 0.5;   // H1: costate_static < value
  double p_static_vs_active = 0.5;  // H1: costate_active < costate_static
};

struct ComparisonReport {
  std::vector<SizeRow> rows;
  nlohmann::json to_json() const;
};

// Aggregates every summary.json under <out>/runs and writes the report.
ComparisonReport cmd_compare(const std::string& out_dir);

// Trains every (variant, size, repeat) cell of rc.plan then compares.
ComparisonReport run_plan(const RunConfig& rc, const std::string& out_dir);

double mean(const std::vector<double>& x);
double sample_std(const std::vector<double>& x);

}  // namespace costate
