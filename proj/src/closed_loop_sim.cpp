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

#include "costate/closed_loop_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>

namespace costate {

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kCostateNet: return "costate_net";
    case ControllerKind::kValueNetGrad: return "value_net_grad";
    case ControllerKind::kOracleBvp: return "oracle_bvp";
    case ControllerKind::kAnalyticB0: return "analytic_b0";
    case ControllerKind::kZero: return "zero";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& s) {
  for (auto k : {ControllerKind::kCostateNet, ControllerKind::kValueNetGrad, ControllerKind::kOracleBvp,
                 ControllerKind::kAnalyticB0, ControllerKind::kZero}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown controller kind '" + s + "'");
}

SimConfig SimConfig::from_game(const GameConfig& cfg, ControllerKind kind) {
  SimConfig s;
  s.game = cfg;
  s.box = CollisionBox::from_game(cfg);
  s.kinds = {kind, kind};
  return s;
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || substeps < 1) throw std::invalid_argument("dt and substeps must be positive");
  const double n = game.horizon_T / dt;
  if (std::abs(n - std::round(n)) > 1e-6) throw std::invalid_argument("dt must divide the horizon");
  if (!(box.hi >= box.lo)) throw std::invalid_argument("collision box is empty");
}

bool detect_collision(const JointState& s, const CollisionBox& box) {
  auto inside = [&](double d) { return d >= box.lo && d <= box.hi; };
  return inside(s.p1.d) && inside(s.p2.d);
}

namespace {

double box_gap(double d, const CollisionBox& box) {
  if (d < box.lo) return box.lo - d;
  if (d > box.hi) return d - box.hi;
  return 0.0;
}

Costate analytic_b0_costate(const PlayerState& x, double t, const GameConfig& cfg) {
  const double tau = cfg.horizon_T - t;
  const double vT = (x.v + cfg.v_bar * tau + cfg.alpha * tau * tau / 4.0) / (1.0 + tau);
  return {cfg.alpha, -2.0 * (vT - cfg.v_bar) + cfg.alpha * tau};
}

Costate value_costate(const ValueNet& net, const JointState& x, Player i) {
  const Eigen::VectorXd g = net.input_gradient(x, i);
  const int d = i == Player::kOne ? 0 : 2;
  return {-g[d], -g[d + 1]};
}

}  // namespace

std::pair<Costate, Costate> predicted_costates(ControllerKind kind, const JointState& x,
                                               const Models& models, const GameConfig& cfg) {
  switch (kind) {
    case ControllerKind::kCostateNet: {
      if (!models.costate) throw std::invalid_argument("costate_net controller without a network");
      const ParamPair p = models.costate->predict_costate(x);
      return {reconstruct(p.first, x.t, cfg), reconstruct(p.second, x.t, cfg)};
    }
    case ControllerKind::kValueNetGrad:
      if (!models.value) throw std::invalid_argument("value_net_grad controller without a network");
      return {value_costate(*models.value, x, Player::kOne), value_costate(*models.value, x, Player::kTwo)};
    case ControllerKind::kOracleBvp:
      if (!models.oracle) throw std::invalid_argument("oracle_bvp controller without parameters");
      return {reconstruct(models.oracle->first, x.t, cfg), reconstruct(models.oracle->second, x.t, cfg)};
    case ControllerKind::kAnalyticB0:
      return {analytic_b0_costate(x.p1, x.t, cfg), analytic_b0_costate(x.p2, x.t, cfg)};
    case ControllerKind::kZero:
      return {Costate{cfg.alpha, 0.0}, Costate{cfg.alpha, 0.0}};
  }
  throw std::invalid_argument("unknown controller kind");
}

std::array<double, 2> step_controller(const std::array<ControllerKind, 2>& kinds, const JointState& x,
                                      const Models& models, const GameConfig& cfg) {
  std::array<double, 2> u{};
  for (int i = 0; i < 2; ++i) {
    if (kinds[i] == ControllerKind::kZero) continue;
    const auto lam = predicted_costates(kinds[i], x, models, cfg);
    u[i] = optimal_control(i == 0 ? lam.first : lam.second, cfg);
  }
  return u;
}

namespace {

// What a controller commits to for one dt step. Co-state controllers hold
// their predicted parameters and the co-state keeps moving along them; the
// value controller holds its gradient.
struct StepPlan {
  std::array<std::optional<CostateParams>, 2> params;
  std::array<double, 2> held{};
};

StepPlan plan_step(const std::array<ControllerKind, 2>& kinds, const JointState& x, const Models& models,
                   const GameConfig& cfg) {
  StepPlan plan;
  for (int i = 0; i < 2; ++i) {
    const Player pl = i == 0 ? Player::kOne : Player::kTwo;
    const PlayerState& own = i == 0 ? x.p1 : x.p2;
    switch (kinds[i]) {
      case ControllerKind::kCostateNet: {
        if (!models.costate) throw std::invalid_argument("costate_net controller without a network");
        const ParamPair p = models.costate->predict_costate(x);
        plan.params[i] = pl == Player::kOne ? p.first : p.second;
        break;
      }
      case ControllerKind::kOracleBvp:
        if (!models.oracle) throw std::invalid_argument("oracle_bvp controller without parameters");
        plan.params[i] = pl == Player::kOne ? models.oracle->first : models.oracle->second;
        break;
      case ControllerKind::kAnalyticB0: {
        const Costate lam = analytic_b0_costate(own, x.t, cfg);
        plan.params[i] = CostateParams::sentinel(lam.l2 - cfg.alpha * (cfg.horizon_T - x.t), cfg.horizon_T);
        break;
      }
      case ControllerKind::kValueNetGrad:
        if (!models.value) throw std::invalid_argument("value_net_grad controller without a network");
        plan.held[i] = optimal_control(value_costate(*models.value, x, pl), cfg);
        break;
      case ControllerKind::kZero: break;
    }
  }
  return plan;
}

}  // namespace

SimResult simulate(const JointState& x0, const SimConfig& sim, const Models& models) {
  sim.validate();
  const double T = sim.game.horizon_T;
  const int n = std::max(0, static_cast<int>(std::lround((T - x0.t) / sim.dt)));
  SimResult r;
  r.trajectory.reserve(n + 1);
  r.controls.reserve(n + 1);
  JointState x = x0;
  r.min_separation = std::max(box_gap(x.p1.d, sim.box), box_gap(x.p2.d, sim.box));
  r.collided = detect_collision(x, sim.box);
  r.trajectory.push_back(x);
  for (int k = 0; k < n; ++k) {
    r.controls.push_back(step_controller(sim.kinds, x, models, sim.game));
    const StepPlan plan = plan_step(sim.kinds, x, models, sim.game);
    const double t_next = k + 1 == n ? T : x0.t + (k + 1) * sim.dt;
    const double t_start = x.t;
    const double h = (t_next - t_start) / sim.substeps;
    for (int s = 0; s < sim.substeps; ++s) {
      // Midpoint sample: exact for the linear co-state of a window-free model.
      const double tm = t_start + (s + 0.5) * h;
      for (int i = 0; i < 2; ++i) {
        PlayerState& p = i == 0 ? x.p1 : x.p2;
        const double u = plan.params[i] ? optimal_control(reconstruct(*plan.params[i], tm, sim.game), sim.game)
                                        : plan.held[i];
        p.d += p.v * h + 0.5 * u * h * h;
        p.v += u * h;
      }
    }
    x.t = t_next;
    r.trajectory.push_back(x);
    r.collided = r.collided || detect_collision(x, sim.box);
    r.min_separation = std::min(r.min_separation, std::max(box_gap(x.p1.d, sim.box), box_gap(x.p2.d, sim.box)));
  }
  r.controls.push_back(step_controller(sim.kinds, x, models, sim.game));
  return r;
}

bool trajectory_collides(const BvpSolution& sol, const CollisionBox& box) {
  for (std::size_t k = 0; k < sol.size(); ++k) {
    if (detect_collision(sol.state(k), box)) return true;
  }
  return false;
}

nlohmann::json EvalReport::summary_json() const {
  return {{"cases", cases},
          {"collisions", collisions},
          {"collision_percentage", collision_percentage},
          {"costate_error_mean", costate_error_mean},
          {"costate_error_std", costate_error_std},
          {"error_records", error_records}};
}

EvalReport evaluate(const Models& models, const Dataset& test, const SimConfig& sim) {
  sim.validate();
  const GameConfig& cfg = sim.game;
  std::vector<const SampleRecord*> starts;
  for (const auto& r : test.records) {
    if (r.t0 == 0.0) starts.push_back(&r);
  }
  // Order-independent: cases are keyed and reported by solution id.
  std::sort(starts.begin(), starts.end(),
            [](const auto* a, const auto* b) { return a->solution_id < b->solution_id; });

  EvalReport rep;
  rep.per_case.resize(starts.size());
  parallel_for(static_cast<int>(starts.size()), sim.threads, [&](int k) {
    const SampleRecord& r = *starts[k];
    Models m = models;
    if (sim.kinds[0] == ControllerKind::kOracleBvp || sim.kinds[1] == ControllerKind::kOracleBvp) {
      m.oracle = ParamPair{r.costate1, r.costate2};
    }
    const SimResult s = simulate(r.joint(), sim, m);
    rep.per_case[k] = {r.solution_id, r.x0, s.collided, s.terminal()};
  });
  rep.cases = static_cast<int>(starts.size());
  for (const auto& c : rep.per_case) rep.collisions += c.collided ? 1 : 0;
  rep.collision_percentage = rep.cases > 0 ? 100.0 * rep.collisions / rep.cases : 0.0;

  std::vector<double> err(test.records.size());
  parallel_for(static_cast<int>(test.records.size()), sim.threads, [&](int k) {
    const SampleRecord& r = test.records[k];
    const JointState x = r.joint();
    Models m = models;
    m.oracle = ParamPair{r.costate1, r.costate2};
    const Costate l1 = reconstruct(r.costate1, r.t0, cfg);
    const Costate l2 = reconstruct(r.costate2, r.t0, cfg);
    std::array<Costate, 2> pred;
    for (int i = 0; i < 2; ++i) {
      const auto both = predicted_costates(sim.kinds[i], x, m, cfg);
      pred[i] = i == 0 ? both.first : both.second;
    }
    err[k] = 0.25 * (std::abs(pred[0].l1 - l1.l1) + std::abs(pred[0].l2 - l1.l2) +
                     std::abs(pred[1].l1 - l2.l1) + std::abs(pred[1].l2 - l2.l2));
  });
  rep.error_records = static_cast<int>(err.size());
  if (!err.empty()) {
    double sum = 0.0;
    for (double e : err) sum += e;
    rep.costate_error_mean = sum / err.size();
    double ss = 0.0;
    for (double e : err) ss += (e - rep.costate_error_mean) * (e - rep.costate_error_mean);
    rep.costate_error_std = err.size() > 1 ? std::sqrt(ss / (err.size() - 1)) : 0.0;
  }
  return rep;
}

void write_case_csv(const EvalReport& r, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + csv_path);
  out << "solution_id,d1,v1,d2,v2,collided,dT1,vT1,dT2,vT2\n";
  char buf[64];
  for (const auto& c : r.per_case) {
    out << c.solution_id;
    for (double v : c.x0) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << ',' << (c.collided ? 1 : 0);
    for (double v : {c.terminal.p1.d, c.terminal.p1.v, c.terminal.p2.d, c.terminal.p2.v}) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

void write_summary_json(const EvalReport& r, const std::string& json_path) {
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + json_path);
  out << r.summary_json().dump(2) << '\n';
}

}  // namespace costate
