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

///////////////////////////////////////////////////////////////////////////////
//
// Pool-based active learning for the co-state network.
//
// A candidate is scored by how far the predicted co-state is from being
// consistent with the PMP dynamics: roll the players forward under the
// predicted controls, integrate the full state/co-state system backwards from
// the reached terminal point, and measure the L2 distance between the
// predicted and the back-integrated co-states.
//
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include "costate/costate_repr.hpp"
#include "costate/data_pipeline.hpp"
#include "costate/game_model.hpp"
#include "costate/neural.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace costate {

using ParamPair = std::pair<CostateParams, CostateParams>;

struct ActiveConfig {
  int candidates_per_iter = 50;
  int picks_per_iter = 10;
  int budget = 0;
  // Grid of the forward rollout and of the L2 comparison.
  double rollout_step = 0.03;
  // RK4 steps per rollout step in the backward integration.
  int inverse_substeps = 10;
  double blowup_cap = 1.0e6;
  bool warm_start = true;
  int threads = 1;
  std::uint64_t seed = 0;

  void validate(int pool_size) const;
};

struct RolloutTrajectory {
  std::vector<double> t;
  std::vector<JointState> x;
  std::vector<std::array<double, 2>> u;
};

struct CostateTrajectory {
  std::vector<double> t;
  std::vector<Costate> lam1;
  std::vector<Costate> lam2;
};

class BlowUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniform grid from t0 to T with spacing at most `step` (at least one step).
std::vector<double> rollout_grid(double t0, double horizon_T, double step);

// Controls clamp(0.5 lam[2]) from the step-model co-states. The control is
// piecewise linear in t, so every grid step is split at its kinks and
// integrated in closed form.
RolloutTrajectory forward_rollout(const JointState& x0, const ParamPair& params, const GameConfig& cfg,
                                  double step);

// RK4 on the full PMP system from (xT, lamT) at T back to t0. Throws BlowUp
// when any component exceeds ac.blowup_cap.
CostateTrajectory inverse_rollout(const JointState& xT, const Costate& lamT1, const Costate& lamT2,
                                  double t0, const GameConfig& cfg, const ActiveConfig& ac);

// Trapezoidal L2 distance over [t0, T] between predicted and back-integrated
// co-states (all four components). BlowUp maps to ac.blowup_cap.
double acquisition(const JointState& x0, const ParamPair& params, const GameConfig& cfg,
                   const ActiveConfig& ac);
double acquisition(const JointState& x0, const CostateNet& net, const GameConfig& cfg,
                   const ActiveConfig& ac);

// Network-ready matrices: inputs 5 x N, targets 8 x N in physical units.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> costate_training_data(const std::vector<SampleRecord>& records);

// Fits input and output scaling of net on `train` (when requested) and runs
// full-batch training with validation-based early stopping.
TrainHistory train_costate_net(CostateNet& net, const std::vector<SampleRecord>& train,
                               const std::vector<SampleRecord>& validation, const TrainConfig& tc,
                               bool fit_scaling, double range_margin);

struct AcquisitionLogRow {
  int iteration = 0;
  int pool_index = 0;
  Point4 x0{};
  double t0_argmax = 0.0;
  double score = 0.0;
  bool picked = false;
};

// Records for a pool point, or throws AllGuessesFailed.
using Labeler = std::function<std::vector<SampleRecord>(int pool_index)>;

struct ActiveResult {
  std::vector<SampleRecord> train;
  std::vector<AcquisitionLogRow> log;
  std::vector<int> labeled;  // pool indices in acquisition order
  std::vector<int> failed;
  int iterations = 0;
  TrainHistory last_history;
};

struct ActiveTrainSettings {
  TrainConfig train;
  double range_margin = 0.2;
  // Score every candidate at these start times and keep the maximum.
  std::vector<double> time_grid{0.0};
};

// Starts from an already trained net. Each iteration draws candidates from
// the remaining pool, labels the top scorers, and retrains.
ActiveResult active_loop(std::vector<SampleRecord> train, const std::vector<Point4>& pool,
                         const Labeler& labeler, const std::vector<SampleRecord>& validation,
                         CostateNet& net, const ActiveConfig& ac, const ActiveTrainSettings& ts,
                         const GameConfig& cfg);

void write_acquisition_log(const std::vector<AcquisitionLogRow>& log, const std::string& csv_path);

}  // namespace costate
