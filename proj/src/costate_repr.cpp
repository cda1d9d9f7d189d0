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

#include "costate/costate_repr.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace costate {

std::string to_string(InteractionType t) {
  switch (t) {
    case InteractionType::kNoCollision:
      return "no_collision";
    case InteractionType::kP1Overtakes:
      return "p1_overtakes";
    case InteractionType::kP2Overtakes:
      return "p2_overtakes";
    case InteractionType::kP1AdvancesP2Evades:
      return "p1_advances_p2_evades";
    case InteractionType::kP2AdvancesP1Evades:
      return "p2_advances_p1_evades";
  }
  return "unknown";
}

InteractionType interaction_from_string(const std::string& s) {
  for (auto t : {InteractionType::kNoCollision, InteractionType::kP1Overtakes,
                 InteractionType::kP2Overtakes, InteractionType::kP1AdvancesP2Evades,
                 InteractionType::kP2AdvancesP1Evades}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown interaction type '" + s + "'");
}

InteractionType mirrored(InteractionType t) {
  switch (t) {
    case InteractionType::kP1Overtakes:
      return InteractionType::kP2Overtakes;
    case InteractionType::kP2Overtakes:
      return InteractionType::kP1Overtakes;
    case InteractionType::kP1AdvancesP2Evades:
      return InteractionType::kP2AdvancesP1Evades;
    case InteractionType::kP2AdvancesP1Evades:
      return InteractionType::kP1AdvancesP2Evades;
    case InteractionType::kNoCollision:
      break;
  }
  return t;
}

CostateParams fit_params(std::span<const double> grid, std::span<const double> lam1, double lamT2,
                         const GameConfig& cfg, const FitOptions& opt) {
  const std::size_t n = grid.size();
  if (n < 3 || lam1.size() != n) throw DegenerateGrid("fit_params needs at least 3 matching samples");

  // Window [i, j) in sample indices: t_in = grid[i], t_out = grid[j], j <= n-1.
  // For a window the optimal q is -mean(r) and the SSE drop is S^2 / count.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + (lam1[k] - cfg.alpha);

  double best_gain = 0.0;
  std::size_t best_i = n - 1;
  std::size_t best_j = n - 1;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = prefix[j] - prefix[i];
      const double gain = s * s / static_cast<double>(j - i);
      if (gain > best_gain) {
        best_gain = gain;
        best_i = i;
        best_j = j;
      }
    }
  }

  const double T = grid.back();
  if (best_j == best_i) return CostateParams::sentinel(lamT2, T);
  const double q = -(prefix[best_j] - prefix[best_i]) / static_cast<double>(best_j - best_i);
  if (std::abs(q) < opt.q_tol_rel * cfg.alpha) return CostateParams::sentinel(lamT2, T);
  return {lamT2, grid[best_i], grid[best_j], q};
}

double reconstruct_lambda1(const CostateParams& p, double t, const GameConfig& cfg) {
  return cfg.alpha - p.q * (t >= p.t_in ? 1.0 : 0.0) + p.q * (t >= p.t_out ? 1.0 : 0.0);
}

double reconstruct_lambda2(const CostateParams& p, double t, const GameConfig& cfg) {
  const double T = cfg.horizon_T;
  const double overlap = std::max(0.0, p.t_out - std::max(t, p.t_in));
  return p.lamT2 + cfg.alpha * (T - t) - p.q * overlap;
}

Costate reconstruct(const CostateParams& p, double t, const GameConfig& cfg) {
  return {reconstruct_lambda1(p, t, cfg), reconstruct_lambda2(p, t, cfg)};
}

CostateParams clip_to(const CostateParams& p, double t0, const GameConfig& cfg) {
  if (!p.has_window() || t0 >= p.t_out) return CostateParams::sentinel(p.lamT2, cfg.horizon_T);
  CostateParams out = p;
  out.t_in = std::max(p.t_in, t0);
  return out;
}

InteractionType classify_interaction(const CostateParams& p1, const CostateParams& p2) {
  const bool w1 = p1.has_window();
  const bool w2 = p2.has_window();
  if (!w1 && !w2) return InteractionType::kNoCollision;
  if (w1 && !w2) return InteractionType::kP1Overtakes;
  if (!w1 && w2) return InteractionType::kP2Overtakes;
  // Both active: the earlier entrant advances, ties broken by earlier exit.
  if (p1.t_in != p2.t_in) {
    return p1.t_in < p2.t_in ? InteractionType::kP1AdvancesP2Evades
                             : InteractionType::kP2AdvancesP1Evades;
  }
  if (p1.t_out != p2.t_out) {
    return p1.t_out < p2.t_out ? InteractionType::kP1AdvancesP2Evades
                               : InteractionType::kP2AdvancesP1Evades;
  }
  return InteractionType::kP1AdvancesP2Evades;
}

TransposeExp double_integrator_transpose_exp() {
  return [](double tau) {
    Eigen::Matrix2d m;
    m << 1.0, 0.0, tau, 1.0;
    return m;
  };
}

Costate general_reconstruct(const Costate& lamT, const CostateParams& p, double t,
                            const TransposeExp& expAt, const GameConfig& cfg) {
  const double T = cfg.horizon_T;
  Eigen::Vector2d lam = expAt(T - t) * Eigen::Vector2d(lamT.l1, lamT.l2);
  const Eigen::Vector2d jump(p.q, 0.0);
  // Walking back from T, lam[1] drops by q at t_out and recovers at t_in.
  if (t < p.t_out) lam -= expAt(p.t_out - t) * jump;
  if (t < p.t_in) lam += expAt(p.t_in - t) * jump;
  return {lam[0], lam[1]};
}

double reconstruction_rmse(const CostateParams& p, std::span<const double> grid,
                           std::span<const double> lam1, const GameConfig& cfg) {
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double e = lam1[k] - reconstruct_lambda1(p, grid[k], cfg);
    acc += e * e;
  }
  return grid.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(grid.size()));
}

}  // namespace costate
