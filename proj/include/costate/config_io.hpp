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

// JSON run configuration. Every key is optional; missing keys keep their
// defaults and unknown keys are rejected so typos do not go unnoticed.
//
//   {
//     "game":    {"penalty_b": 10000, ...},
//     "solver":  {"initial_nodes": 61, ...},
//     "sampler": {"n_train": 400, "seed": 0, ...},
//     "train":   {"learning_rate": 0.01, "patience_epochs": 500, ...},
//     "active":  {"candidates_per_iter": 50, "picks_per_iter": 10, ...},
//     "plan":    {"sizes": [50, 150, 250], "repeats": 5, "base_seed": 0},
//     "threads": 1
//   }

#pragma once

#include "costate/active_learning.hpp"
#include "costate/bvp_solver.hpp"
#include "costate/data_pipeline.hpp"
#include "costate/game_model.hpp"
#include "costate/neural.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace costate {

struct ExperimentPlan {
  std::vector<int> sizes{50, 150, 250};
  int repeats = 5;
  std::uint64_t base_seed = 0;
  std::vector<std::string> variants{"value", "costate_static", "costate_active"};
  // Share of each size acquired actively (rounded down to whole picks).
  double active_fraction = 0.5;

  static ExperimentPlan full();
  std::uint64_t seed(int repeat) const { return base_seed + static_cast<std::uint64_t>(repeat); }
  void validate(int train_pool_size) const;
};

struct RunConfig {
  GameConfig game;
  SolverConfig solver;
  SamplerConfig sampler;
  TrainConfig train;
  ActiveConfig active;
  ExperimentPlan plan;
  // Epoch cap for each warm-started retrain inside the active loop.
  int retrain_max_epochs = 1000;
  double range_margin = 0.2;
  double fit_step = 0.01;
  // gen-data fails when more points than this fraction cannot be solved.
  double max_skip_rate = 0.02;
  int threads = 1;

  // Full-scale counts, repeats and sizes.
  static RunConfig full();
  PipelineConfig pipeline() const;
  void validate() const;
};

nlohmann::json to_json(const RunConfig& rc);
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::string& path, bool full);
void save_run_config(const RunConfig& rc, const std::string& path);

}  // namespace costate
