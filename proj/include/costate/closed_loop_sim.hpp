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

// Closed-loop rollouts of both players under learned feedback and the two
// evaluation metrics: collision rate and co-state prediction error.

#pragma once

#include "costate/active_learning.hpp"
#include "costate/bvp_solver.hpp"
#include "costate/data_pipeline.hpp"
#include "costate/game_model.hpp"
#include "costate/neural.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace costate {

enum class ControllerKind { kCostateNet, kValueNetGrad, kOracleBvp, kAnalyticB0, kZero };

std::string to_string(ControllerKind k);
ControllerKind controller_from_string(const std::string& s);

// Closed interval on both roads where the vehicle bodies overlap.
struct CollisionBox {
  double lo = 34.25;
  double hi = 38.75;

  static CollisionBox from_game(const GameConfig& cfg) {
    return {(cfg.road_R - cfg.car_W) / 2.0, (cfg.road_R + cfg.car_W) / 2.0 + cfg.car_L};
  }
};

struct SimConfig {
  double dt = 0.03;
  // Exact integration sub-steps per control step (controls held constant).
  int substeps = 1;
  GameConfig game;
  CollisionBox box;
  std::array<ControllerKind, 2> kinds{ControllerKind::kCostateNet, ControllerKind::kCostateNet};
  int threads = 1;

  static SimConfig from_game(const GameConfig& cfg, ControllerKind kind);
  void validate() const;
};

// Whatever the controllers need; unused members may stay empty.
struct Models {
  const CostateNet* costate = nullptr;
  const ValueNet* value = nullptr;
  // Fitted ground-truth parameters replayed by kOracleBvp.
  std::optional<ParamPair> oracle;
};

struct SimResult {
  std::vector<JointState> trajectory;
  std::vector<std::array<double, 2>> controls;
  bool collided = false;
  // min over time of the larger distance of the two players to the box; 0
  // exactly when collided.
  double min_separation = 0.0;
  JointState terminal() const { return trajectory.back(); }
};

bool detect_collision(const JointState& s, const CollisionBox& box);

// Predicted co-states of both players at x for the given controller kind.
std::pair<Costate, Costate> predicted_costates(ControllerKind kind, const JointState& x,
                                               const Models& models, const GameConfig& cfg);

std::array<double, 2> step_controller(const std::array<ControllerKind, 2>& kinds, const JointState& x,
                                      const Models& models, const GameConfig& cfg);

SimResult simulate(const JointState& x0, const SimConfig& sim, const Models& models);

// Hard-box collision anywhere on the nodes of an equilibrium trajectory.
bool trajectory_collides(const BvpSolution& sol, const CollisionBox& box);

struct CaseResult {
  int solution_id = 0;
  Point4 x0{};
  bool collided = false;
  JointState terminal;
};

struct EvalReport {
  int cases = 0;
  int collisions = 0;
  double collision_percentage = 0.0;
  double costate_error_mean = 0.0;
  double costate_error_std = 0.0;
  int error_records = 0;
  std::vector<CaseResult> per_case;

  nlohmann::json summary_json() const;
};

// Collisions over the t0 = 0 records of `test`; co-state error over every
// record. kOracleBvp replays each case's own labels.
EvalReport evaluate(const Models& models, const Dataset& test, const SimConfig& sim);

void write_case_csv(const EvalReport& r, const std::string& csv_path);
void write_summary_json(const EvalReport& r, const std::string& json_path);

}  // namespace costate
