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

#include "costate/game_model.hpp"

#include <algorithm>
#include <cmath>

namespace costate {

namespace {

// 1 / (1 + exp(-z)), branch form so large |z| never overflows.
double logistic(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct SigmaParts {
  double rise;  // logistic(gamma (d - entry))
  double fall;  // logistic(-gamma (d - exit))
};

SigmaParts sigma_parts(double d, double theta, const GameConfig& cfg) {
  const double g = cfg.penalty_gamma;
  return {logistic(g * (d - cfg.zone_entry(theta))), logistic(-g * (d - cfg.zone_exit()))};
}

}  // namespace

void GameConfig::validate() const {
  if (!(horizon_T > 0.0)) throw std::invalid_argument("horizon_T must be positive");
  if (!(penalty_b >= 0.0)) throw std::invalid_argument("penalty_b must be non-negative");
  if (!(penalty_gamma > 0.0)) throw std::invalid_argument("penalty_gamma must be positive");
  if (!(u_min < 0.0 && 0.0 < u_max)) throw std::invalid_argument("need u_min < 0 < u_max");
  if (!(road_R > car_L && car_L > 0.0)) throw std::invalid_argument("need road_R > car_L > 0");
  if (!(car_W > 0.0)) throw std::invalid_argument("car_W must be positive");
}

PmpVector PmpState::to_vector() const {
  PmpVector y;
  y << joint.p1.d, joint.p1.v, joint.p2.d, joint.p2.v, lam1.l1, lam1.l2, lam2.l1, lam2.l2;
  return y;
}

PmpState PmpState::from_vector(const PmpVector& y, double t) {
  PmpState ps;
  ps.joint = {{y[0], y[1]}, {y[2], y[3]}, t};
  ps.lam1 = {y[4], y[5]};
  ps.lam2 = {y[6], y[7]};
  return ps;
}

std::pair<double, double> dynamics_rhs(const PlayerState& x, double u) { return {x.v, u}; }

double sigma(double d, double theta, const GameConfig& cfg) {
  const auto [rise, fall] = sigma_parts(d, theta, cfg);
  return rise * fall;
}

double sigma_grad(double d, double theta, const GameConfig& cfg) {
  // d/dz logistic(z) = s (1 - s)
  const auto [rise, fall] = sigma_parts(d, theta, cfg);
  const double g = cfg.penalty_gamma;
  return g * rise * (1.0 - rise) * fall - g * fall * (1.0 - fall) * rise;
}

double collision_penalty(const JointState& s, Player i, const GameConfig& cfg) {
  return cfg.penalty_b * sigma(s.player(i).d, cfg.penalty_theta, cfg) *
         sigma(s.player(other(i)).d, 1.0, cfg);
}

double penalty_grad_own(const JointState& s, Player i, const GameConfig& cfg) {
  return cfg.penalty_b * sigma_grad(s.player(i).d, cfg.penalty_theta, cfg) *
         sigma(s.player(other(i)).d, 1.0, cfg);
}

double instantaneous_loss(const JointState& s, Player i, double u_i, const GameConfig& cfg) {
  return u_i * u_i + collision_penalty(s, i, cfg);
}

double terminal_loss(const PlayerState& x, const GameConfig& cfg) {
  const double dv = x.v - cfg.v_bar;
  return -cfg.alpha * x.d + dv * dv;
}

Costate terminal_costate(const PlayerState& x, const GameConfig& cfg) {
  return {cfg.alpha, -2.0 * (x.v - cfg.v_bar)};
}

double hamiltonian(const JointState& s, double u_i, const Costate& lam_i, Player i,
                   const GameConfig& cfg) {
  const auto [d_dot, v_dot] = dynamics_rhs(s.player(i), u_i);
  return lam_i.l1 * d_dot + lam_i.l2 * v_dot - instantaneous_loss(s, i, u_i, cfg);
}

double optimal_control(const Costate& lam_i, const GameConfig& cfg) {
  return std::clamp(0.5 * lam_i.l2, cfg.u_min, cfg.u_max);
}

PmpVector pmp_rhs(const PmpVector& y, const GameConfig& cfg) {
  const JointState s{{y[0], y[1]}, {y[2], y[3]}, 0.0};
  const Costate lam1{y[4], y[5]};
  const Costate lam2{y[6], y[7]};
  PmpVector dy;
  dy[0] = y[1];
  dy[1] = optimal_control(lam1, cfg);
  dy[2] = y[3];
  dy[3] = optimal_control(lam2, cfg);
  dy[4] = penalty_grad_own(s, Player::kOne, cfg);
  dy[5] = -lam1.l1;
  dy[6] = penalty_grad_own(s, Player::kTwo, cfg);
  dy[7] = -lam2.l1;
  return dy;
}

PmpState pmp_rhs(const PmpState& ps, const GameConfig& cfg) {
  return PmpState::from_vector(pmp_rhs(ps.to_vector(), cfg), ps.joint.t);
}

}  // namespace costate
