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

// Two-player uncontrolled intersection game.
//
// Each player drives a double integrator along its own road. Player i pays
//   l_i = u_i^2 + phi_i(x)          (running loss)
//   g_i = -alpha d_i(T) + (v_i(T) - v_bar)^2   (terminal loss)
// where phi_i is a product of logistic bumps that is large when both players
// sit inside the crossing zone at the same time.
//
// The co-state lambda_i = (l1, l2) is paired with player i's own dynamics
// block only; cross terms do not depend on u_i.

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <utility>

namespace costate {

struct GameConfig {
  double horizon_T = 3.0;
  double alpha = 1.0;
  double v_bar = 18.0;
  double road_R = 70.0;
  double car_L = 3.0;
  double car_W = 1.5;
  double penalty_b = 1.0e4;
  double penalty_gamma = 5.0;
  double penalty_theta = 5.0;
  double u_min = -5.0;
  double u_max = 10.0;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;

  // Position where sigma(., theta) rises.
  double zone_entry(double theta) const { return road_R / 2.0 - theta * car_W / 2.0; }
  // Position where sigma(., theta) falls (independent of theta).
  double zone_exit() const { return (road_R + car_W) / 2.0 + car_L; }
};

enum class Player { kOne = 0, kTwo = 1 };

inline Player other(Player i) { return i == Player::kOne ? Player::kTwo : Player::kOne; }
inline int index(Player i) { return static_cast<int>(i); }

struct PlayerState {
  double d = 0.0;
  double v = 0.0;
};

struct JointState {
  PlayerState p1;
  PlayerState p2;
  double t = 0.0;

  const PlayerState& player(Player i) const { return i == Player::kOne ? p1 : p2; }
  PlayerState& player(Player i) { return i == Player::kOne ? p1 : p2; }

  JointState swapped() const { return {p2, p1, t}; }
};

struct Costate {
  double l1 = 0.0;
  double l2 = 0.0;
};

// Flat layout of the coupled state/co-state system.
//   [d1, v1, d2, v2, lam1[1], lam1[2], lam2[1], lam2[2]]
using PmpVector = Eigen::Matrix<double, 8, 1>;

struct PmpState {
  JointState joint;
  Costate lam1;
  Costate lam2;

  const Costate& lam(Player i) const { return i == Player::kOne ? lam1 : lam2; }

  PmpVector to_vector() const;
  static PmpState from_vector(const PmpVector& y, double t);
};

// Double-integrator dynamics: (d_dot, v_dot) = (v, u).
std::pair<double, double> dynamics_rhs(const PlayerState& x, double u);

// Logistic rise near zone_entry(theta) times logistic fall near zone_exit().
double sigma(double d, double theta, const GameConfig& cfg);
double sigma_grad(double d, double theta, const GameConfig& cfg);

// phi_i = b sigma(d_i, theta) sigma(d_-i, 1)
double collision_penalty(const JointState& s, Player i, const GameConfig& cfg);
// d phi_i / d d_i
double penalty_grad_own(const JointState& s, Player i, const GameConfig& cfg);

double instantaneous_loss(const JointState& s, Player i, double u_i, const GameConfig& cfg);
double terminal_loss(const PlayerState& x, const GameConfig& cfg);
// -grad terminal_loss: (alpha, -2 (v - v_bar)).
Costate terminal_costate(const PlayerState& x, const GameConfig& cfg);

double hamiltonian(const JointState& s, double u_i, const Costate& lam_i, Player i,
                   const GameConfig& cfg);

// argmax_u H over [u_min, u_max], i.e. clamp(0.5 l2).
double optimal_control(const Costate& lam_i, const GameConfig& cfg);

// Time derivative of the 8-dimensional PMP system with the softened penalty.
PmpVector pmp_rhs(const PmpVector& y, const GameConfig& cfg);
PmpState pmp_rhs(const PmpState& ps, const GameConfig& cfg);

}  // namespace costate
