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

// Low-dimensional co-state summary.
//
// With double-integrator dynamics and a collision penalty, the position
// co-state of each player is alpha everywhere except on one window:
//
//   lam[1](t) = alpha - q 1(t >= t_in) + q 1(t >= t_out)
//
// and the speed co-state is its integral from T backwards,
//
//   lam[2](t) = lamT2 + int_t^T lam[1](s) ds.
//
// lam[1](T) = alpha is implied and not stored.

#pragma once

#include "costate/game_model.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace costate {

struct CostateParams {
  double lamT2 = 0.0;
  double t_in = 0.0;
  double t_out = 0.0;
  double q = 0.0;

  // No close call: empty window at T.
  static CostateParams sentinel(double lamT2, double horizon_T) {
    return {lamT2, horizon_T, horizon_T, 0.0};
  }
  bool has_window() const { return q != 0.0 && t_out > t_in; }

  bool operator==(const CostateParams&) const = default;
};

enum class InteractionType {
  kNoCollision,
  kP1Overtakes,
  kP2Overtakes,
  kP1AdvancesP2Evades,
  kP2AdvancesP1Evades,
};

std::string to_string(InteractionType t);
InteractionType interaction_from_string(const std::string& s);
// Tag with the roles of the two players exchanged.
InteractionType mirrored(InteractionType t);

class DegenerateGrid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FitOptions {
  // Fits with |q| below q_tol_rel * alpha collapse to the sentinel.
  double q_tol_rel = 1.0e-3;
};

// Least-squares step fit: every (t_in, t_out) pair of grid times is tried with
// its closed-form q. Throws DegenerateGrid for fewer than 3 samples.
CostateParams fit_params(std::span<const double> grid, std::span<const double> lam1, double lamT2,
                         const GameConfig& cfg, const FitOptions& opt = {});

double reconstruct_lambda1(const CostateParams& p, double t, const GameConfig& cfg);
double reconstruct_lambda2(const CostateParams& p, double t, const GameConfig& cfg);
Costate reconstruct(const CostateParams& p, double t, const GameConfig& cfg);

// Labels for a game restarted at t0 on the same trajectory: windows that
// already closed become the sentinel, an open window starts at t0.
CostateParams clip_to(const CostateParams& p, double t0, const GameConfig& cfg);

InteractionType classify_interaction(const CostateParams& p1, const CostateParams& p2);

// exp(A^T tau) for a 2x2 linear system.
using TransposeExp = std::function<Eigen::Matrix2d(double)>;

// Double integrator: exp(A^T tau) maps (a, b) to (a, a tau + b).
TransposeExp double_integrator_transpose_exp();

// Terminal co-state propagated by exp(A^T (T - t)), plus the two jumps of
// size q on the first component, each propagated from its breakpoint.
Costate general_reconstruct(const Costate& lamT, const CostateParams& p, double t,
                            const TransposeExp& expAt, const GameConfig& cfg);

// Root-mean-square error of the step model against samples.
double reconstruction_rmse(const CostateParams& p, std::span<const double> grid,
                           std::span<const double> lam1, const GameConfig& cfg);

}  // namespace costate
