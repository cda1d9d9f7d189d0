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

#include "costate/bvp_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include <json.hpp>

namespace costate {

namespace {

constexpr int kDim = 8;

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct Hermite {
  PmpVector y;
  PmpVector dy;
};

// Collocation polynomial on one interval at fraction s in [0, 1].
Hermite hermite(const PmpVector& y0, const PmpVector& f0, const PmpVector& y1,
                const PmpVector& f1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  Hermite out;
  out.y = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * y1 +
          (s3 - s2) * h * f1;
  out.dy = (6 * s2 - 6 * s) / h * y0 + (3 * s2 - 4 * s + 1) * f0 + (-6 * s2 + 6 * s) / h * y1 +
           (3 * s2 - 2 * s) * f1;
  return out;
}

PmpVector midpoint(const PmpVector& y0, const PmpVector& f0, const PmpVector& y1,
                   const PmpVector& f1, double h) {
  return 0.5 * (y0 + y1) - h / 8.0 * (f1 - f0);
}

// (y1 - y0)/h - (f0 + 4 f(ymid) + f1)/6
PmpVector interval_residual(const PmpVector& y0, const PmpVector& f0, const PmpVector& y1,
                            const PmpVector& f1, double h, const GameConfig& cfg) {
  const PmpVector fm = pmp_rhs(midpoint(y0, f0, y1, f1, h), cfg);
  return (y1 - y0) / h - (f0 + 4.0 * fm + f1) / 6.0;
}

PmpVector state_of(const JointState& x) {
  PmpVector y = PmpVector::Zero();
  y[0] = x.p1.d;
  y[1] = x.p1.v;
  y[2] = x.p2.d;
  y[3] = x.p2.v;
  return y;
}

class CollocationSystem {
 public:
  CollocationSystem(const JointState& x0, const std::vector<double>& grid, const GameConfig& cfg)
      : x0_(state_of(x0)), grid_(grid), cfg_(cfg), n_(static_cast<int>(grid.size())) {}

  int unknowns() const { return kDim * n_; }

  Vec residual(const Vec& Y) const {
    Vec F(unknowns());
    std::vector<PmpVector> f(n_);
    for (int k = 0; k < n_; ++k) f[k] = pmp_rhs(node(Y, k), cfg_);
    F.segment<4>(0) = node(Y, 0).head<4>() - x0_.head<4>();
    for (int k = 0; k + 1 < n_; ++k) {
      const double h = grid_[k + 1] - grid_[k];
      F.segment<kDim>(4 + kDim * k) = interval_residual(node(Y, k), f[k], node(Y, k + 1), f[k + 1], h, cfg_);
    }
    F.segment<4>(unknowns() - 4) = terminal_residual(node(Y, n_ - 1));
    return F;
  }

  SpMat jacobian(const Vec& Y) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n_) * 16 * kDim + 16);
    for (int j = 0; j < 4; ++j) trip.emplace_back(j, j, 1.0);

    std::vector<PmpVector> f(n_);
    for (int k = 0; k < n_; ++k) f[k] = pmp_rhs(node(Y, k), cfg_);

    const double sq_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    for (int k = 0; k + 1 < n_; ++k) {
      const double h = grid_[k + 1] - grid_[k];
      const int row0 = 4 + kDim * k;
      for (int side = 0; side < 2; ++side) {
        const int kk = k + side;
        for (int j = 0; j < kDim; ++j) {
          PmpVector yp = node(Y, kk);
          PmpVector ym = yp;
          const double step = sq_eps * std::max(1.0, std::abs(yp[j]));
          yp[j] += step;
          ym[j] -= step;
          PmpVector rp;
          PmpVector rm;
          if (side == 0) {
            rp = interval_residual(yp, pmp_rhs(yp, cfg_), node(Y, k + 1), f[k + 1], h, cfg_);
            rm = interval_residual(ym, pmp_rhs(ym, cfg_), node(Y, k + 1), f[k + 1], h, cfg_);
          } else {
            rp = interval_residual(node(Y, k), f[k], yp, pmp_rhs(yp, cfg_), h, cfg_);
            rm = interval_residual(node(Y, k), f[k], ym, pmp_rhs(ym, cfg_), h, cfg_);
          }
          const PmpVector col = (rp - rm) / (2.0 * step);
          for (int r = 0; r < kDim; ++r) {
            if (col[r] != 0.0) trip.emplace_back(row0 + r, kDim * kk + j, col[r]);
          }
        }
      }
    }

    // Terminal co-state rows: lam[1] - alpha, lam[2] + 2 (v - v_bar).
    const int last = kDim * (n_ - 1);
    const int row = unknowns() - 4;
    trip.emplace_back(row + 0, last + 4, 1.0);
    trip.emplace_back(row + 1, last + 5, 1.0);
    trip.emplace_back(row + 1, last + 1, 2.0);
    trip.emplace_back(row + 2, last + 6, 1.0);
    trip.emplace_back(row + 3, last + 7, 1.0);
    trip.emplace_back(row + 3, last + 3, 2.0);

    SpMat J(unknowns(), unknowns());
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  }

  static PmpVector node(const Vec& Y, int k) { return Y.segment<kDim>(kDim * k); }

 private:
  Eigen::Matrix<double, 4, 1> terminal_residual(const PmpVector& y) const {
    Eigen::Matrix<double, 4, 1> r;
    const Costate c1 = terminal_costate({y[0], y[1]}, cfg_);
    const Costate c2 = terminal_costate({y[2], y[3]}, cfg_);
    r << y[4] - c1.l1, y[5] - c1.l2, y[6] - c2.l1, y[7] - c2.l2;
    return r;
  }

  PmpVector x0_;
  const std::vector<double>& grid_;
  const GameConfig& cfg_;
  int n_;
};

Vec pack(const std::vector<PmpVector>& nodes) {
  Vec Y(kDim * static_cast<int>(nodes.size()));
  for (std::size_t k = 0; k < nodes.size(); ++k) Y.segment<kDim>(kDim * static_cast<int>(k)) = nodes[k];
  return Y;
}

std::vector<PmpVector> unpack(const Vec& Y) {
  std::vector<PmpVector> nodes(Y.size() / kDim);
  for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = Y.segment<kDim>(kDim * static_cast<int>(k));
  return nodes;
}

struct NewtonResult {
  SolveStatus status = SolveStatus::kNonConvergence;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
};

// Damped Newton with the affine-invariant natural monotonicity test.
NewtonResult newton(const JointState& x0, const std::vector<double>& grid,
                    std::vector<PmpVector>& nodes, const GameConfig& cfg, const SolverConfig& sc) {
  CollocationSystem sys(x0, grid, cfg);
  Vec Y = pack(nodes);
  Vec F = sys.residual(Y);
  NewtonResult out;
  out.residual = F.lpNorm<Eigen::Infinity>();
  int stalled = 0;

  for (int it = 0; it < sc.max_newton_iterations; ++it) {
    if (!std::isfinite(out.residual)) break;
    if (out.residual < sc.newton_tol) {
      out.status = SolveStatus::kConverged;
      break;
    }
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(sys.jacobian(Y));
    if (lu.info() != Eigen::Success) {
      out.status = SolveStatus::kSingularJacobian;
      nodes = unpack(Y);
      return out;
    }
    const Vec dx = lu.solve(-F);
    if (!dx.allFinite()) {
      out.status = SolveStatus::kSingularJacobian;
      nodes = unpack(Y);
      return out;
    }
    const double dx_norm = dx.norm();

    double lambda = 1.0;
    Vec Y_trial;
    Vec F_trial;
    for (int halving = 0; halving <= sc.max_step_halvings; ++halving) {
      Y_trial = Y + lambda * dx;
      F_trial = sys.residual(Y_trial);
      if (F_trial.allFinite()) {
        const Vec dx_bar = lu.solve(-F_trial);
        if (dx_bar.norm() <= (1.0 - 0.5 * lambda) * dx_norm || dx_norm < 1e-12) break;
      }
      if (halving < sc.max_step_halvings) lambda *= 0.5;
    }
    Y = Y_trial;
    F = F_trial;
    const double previous = out.residual;
    out.residual = F.lpNorm<Eigen::Infinity>();
    out.iterations = it + 1;

    // Round-off floor: below the defect tolerance but no longer improving.
    stalled = out.residual > 0.5 * previous ? stalled + 1 : 0;
    if (out.residual < sc.defect_tol && stalled >= 3) {
      out.status = SolveStatus::kConverged;
      break;
    }
  }
  if (out.status != SolveStatus::kConverged && out.residual < sc.newton_tol) {
    out.status = SolveStatus::kConverged;
  }
  nodes = unpack(Y);
  return out;
}

std::vector<double> uniform_grid(double t0, double T, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = t0 + (T - t0) * k / (n - 1);
  g.back() = T;
  return g;
}

// Nodes of the collocation polynomial at new grid points.
std::vector<PmpVector> resample(const std::vector<double>& grid, const std::vector<PmpVector>& nodes,
                                const std::vector<double>& new_grid, const GameConfig& cfg) {
  BvpSolution tmp;
  tmp.grid = grid;
  tmp.nodes = nodes;
  tmp.slopes.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) tmp.slopes[k] = pmp_rhs(nodes[k], cfg);
  std::vector<PmpVector> out(new_grid.size());
  for (std::size_t k = 0; k < new_grid.size(); ++k) out[k] = tmp.interpolate(new_grid[k]);
  return out;
}

PmpVector guess_node(double t0, double t, const JointState& x0, double u1, double u2,
                     double push_end, const GameConfig& cfg) {
  // Constant acceleration u_i until push_end, then constant speed.
  auto integrate = [&](const PlayerState& p, double u) {
    const double s_push = std::min(t, push_end) - t0;
    const double s_free = std::max(0.0, t - push_end);
    const double v_push = p.v + u * s_push;
    return PlayerState{p.d + p.v * s_push + 0.5 * u * s_push * s_push + v_push * s_free, v_push};
  };
  auto final_speed = [&](const PlayerState& p, double u) {
    return p.v + u * (std::min(cfg.horizon_T, push_end) - t0);
  };
  const PlayerState a = integrate(x0.p1, u1);
  const PlayerState b = integrate(x0.p2, u2);
  const double T = cfg.horizon_T;
  const double w = (t - t0) / (T - t0);
  const double lamT1 = terminal_costate({0.0, final_speed(x0.p1, u1)}, cfg).l2;
  const double lamT2 = terminal_costate({0.0, final_speed(x0.p2, u2)}, cfg).l2;
  const double c1 = t < push_end ? 2.0 * u1 : 0.0;
  const double c2 = t < push_end ? 2.0 * u2 : 0.0;
  PmpVector y;
  y << a.d, a.v, b.d, b.v, cfg.alpha, (1.0 - w) * c1 + w * lamT1, cfg.alpha, (1.0 - w) * c2 + w * lamT2;
  return y;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kNonConvergence:
      return "non_convergence";
    case SolveStatus::kSingularJacobian:
      return "singular_jacobian";
  }
  return "unknown";
}

JointState BvpSolution::state(std::size_t k) const {
  const PmpVector& y = nodes[k];
  return {{y[0], y[1]}, {y[2], y[3]}, grid[k]};
}

Costate BvpSolution::costate(std::size_t k, Player i) const {
  const PmpVector& y = nodes[k];
  return i == Player::kOne ? Costate{y[4], y[5]} : Costate{y[6], y[7]};
}

PmpVector BvpSolution::interpolate(double t) const {
  if (t <= grid.front()) return nodes.front();
  if (t >= grid.back()) return nodes.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - grid.begin()) - 1;
  const double h = grid[k + 1] - grid[k];
  const double s = (t - grid[k]) / h;
  if (s == 0.0) return nodes[k];
  return hermite(nodes[k], slopes[k], nodes[k + 1], slopes[k + 1], h, s).y;
}

std::vector<GuessTrajectory> initial_guesses(const JointState& x0, const GameConfig& cfg,
                                             const SolverConfig& sc) {
  const double t0 = x0.t;
  const double T = cfg.horizon_T;
  const std::vector<double> grid = uniform_grid(t0, T, sc.initial_nodes);
  const double push = 0.6 * std::min(cfg.u_max, -cfg.u_min);
  const double push_end = std::min(T, t0 + 1.5);

  struct Spec {
    const char* label;
    double u1;
    double u2;
  };
  const Spec specs[] = {{"nominal", 0.0, 0.0}, {"p1_first", push, -push}, {"p2_first", -push, push}};

  std::vector<GuessTrajectory> out;
  for (const auto& s : specs) {
    GuessTrajectory g;
    g.label = s.label;
    g.grid = grid;
    g.nodes.reserve(grid.size());
    for (double t : grid) g.nodes.push_back(guess_node(t0, t, x0, s.u1, s.u2, push_end, cfg));
    out.push_back(std::move(g));
  }
  return out;
}

void finalize_solution(BvpSolution& sol, const GameConfig& cfg) {
  sol.slopes.resize(sol.nodes.size());
  sol.controls.resize(sol.nodes.size());
  for (std::size_t k = 0; k < sol.nodes.size(); ++k) {
    sol.slopes[k] = pmp_rhs(sol.nodes[k], cfg);
    sol.controls[k] = {optimal_control(sol.costate(k, Player::kOne), cfg),
                       optimal_control(sol.costate(k, Player::kTwo), cfg)};
  }
  sol.values = compute_values(sol, cfg);
}

BvpSolution solve(const JointState& x0, const GuessTrajectory& guess, const GameConfig& cfg,
                  const SolverConfig& sc) {
  if (!(x0.t < cfg.horizon_T)) throw std::invalid_argument("solve: x0.t must be before horizon_T");

  BvpSolution sol;
  sol.guess_label = guess.label;
  sol.grid = guess.grid;
  sol.nodes = guess.nodes;
  sol.nodes.front().head<4>() = state_of(x0).head<4>();

  std::vector<double> ramp = sc.penalty_ramp;
  if (ramp.empty() || ramp.back() != 1.0) ramp.push_back(1.0);
  if (cfg.penalty_b == 0.0) ramp = {1.0};

  NewtonResult nr;
  for (double factor : ramp) {
    GameConfig stage = cfg;
    stage.penalty_b = cfg.penalty_b * factor;
    nr = newton(x0, sol.grid, sol.nodes, stage, sc);
    sol.newton_iterations += nr.iterations;
    if (nr.status != SolveStatus::kConverged) break;
  }

  for (int pass = 0; nr.status == SolveStatus::kConverged && pass < sc.max_refinements; ++pass) {
    const std::vector<double> defects = interpolant_defects(sol.grid, sol.nodes, cfg);
    std::vector<double> grid;
    grid.reserve(sol.grid.size() * 2);
    std::size_t budget = sc.max_nodes - sol.grid.size();
    for (std::size_t k = 0; k + 1 < sol.grid.size(); ++k) {
      grid.push_back(sol.grid[k]);
      if (defects[k] > sc.refine_tol && budget > 0) {
        grid.push_back(0.5 * (sol.grid[k] + sol.grid[k + 1]));
        --budget;
      }
    }
    grid.push_back(sol.grid.back());
    if (grid.size() == sol.grid.size()) break;
    sol.nodes = resample(sol.grid, sol.nodes, grid, cfg);
    sol.grid = std::move(grid);
    nr = newton(x0, sol.grid, sol.nodes, cfg, sc);
    sol.newton_iterations += nr.iterations;
  }

  sol.status = nr.status;
  finalize_solution(sol, cfg);
  sol.max_defect = residual(sol, x0, cfg);
  sol.converged = nr.status == SolveStatus::kConverged && sol.max_defect < sc.defect_tol;
  if (!sol.converged && sol.status == SolveStatus::kConverged) sol.status = SolveStatus::kNonConvergence;
  return sol;
}

BvpSolution solve_best(const JointState& x0, const GameConfig& cfg, const SolverConfig& sc) {
  std::vector<BvpSolution> ok;
  std::string failures;
  SolverConfig ramped = sc;
  ramped.penalty_ramp = sc.continuation_ramp;
  for (const auto& g : initial_guesses(x0, cfg, sc)) {
    for (const SolverConfig* strategy : std::array<const SolverConfig*, 2>{&sc, &ramped}) {
      if (strategy == &ramped && (sc.continuation_ramp.empty() || sc.continuation_ramp == sc.penalty_ramp)) continue;
      BvpSolution s = solve(x0, g, cfg, *strategy);
      if (s.converged) {
        ok.push_back(std::move(s));
      } else {
        failures += g.label + ":" + to_string(s.status) + " ";
      }
    }
  }
  if (ok.empty()) throw AllGuessesFailed("all initial guesses failed: " + failures);
  // Strict comparison keeps the earliest guess on ties.
  std::size_t best = 0;
  for (std::size_t k = 1; k < ok.size(); ++k) {
    if (ok[k].values[0] + ok[k].values[1] < ok[best].values[0] + ok[best].values[1]) best = k;
  }
  return std::move(ok[best]);
}

std::array<double, 2> values_from(const BvpSolution& sol, double t_start, const GameConfig& cfg) {
  // Simpson on each (partial) interval using the collocation midpoint.
  auto loss = [&](const PmpVector& y, double t) {
    const PmpState ps = PmpState::from_vector(y, t);
    return std::array<double, 2>{
        instantaneous_loss(ps.joint, Player::kOne, optimal_control(ps.lam1, cfg), cfg),
        instantaneous_loss(ps.joint, Player::kTwo, optimal_control(ps.lam2, cfg), cfg)};
  };
  std::array<double, 2> acc{0.0, 0.0};
  const std::size_t n = sol.grid.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a = std::max(sol.grid[k], t_start);
    const double b = sol.grid[k + 1];
    if (b <= a) continue;
    const double h = sol.grid[k + 1] - sol.grid[k];
    auto at = [&](double t) {
      return hermite(sol.nodes[k], sol.slopes[k], sol.nodes[k + 1], sol.slopes[k + 1], h,
                     (t - sol.grid[k]) / h)
          .y;
    };
    const PmpVector ya = a == sol.grid[k] ? sol.nodes[k] : at(a);
    const PmpVector ym = at(0.5 * (a + b));
    const auto la = loss(ya, a);
    const auto lm = loss(ym, 0.5 * (a + b));
    const auto lb = loss(sol.nodes[k + 1], b);
    for (int i = 0; i < 2; ++i) acc[i] += (b - a) / 6.0 * (la[i] + 4.0 * lm[i] + lb[i]);
  }
  const PmpVector& yT = sol.nodes.back();
  acc[0] += terminal_loss({yT[0], yT[1]}, cfg);
  acc[1] += terminal_loss({yT[2], yT[3]}, cfg);
  return acc;
}

std::array<double, 2> compute_values(const BvpSolution& sol, const GameConfig& cfg) {
  return values_from(sol, sol.grid.front(), cfg);
}

double residual(const BvpSolution& sol, const JointState& x0, const GameConfig& cfg) {
  const std::size_t n = sol.nodes.size();
  std::vector<PmpVector> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = pmp_rhs(sol.nodes[k], cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = sol.grid[k + 1] - sol.grid[k];
    const PmpVector r = interval_residual(sol.nodes[k], f[k], sol.nodes[k + 1], f[k + 1], h, cfg);
    worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
  }
  const PmpVector& y0 = sol.nodes.front();
  const PmpVector x = state_of(x0);
  worst = std::max(worst, (y0.head<4>() - x.head<4>()).lpNorm<Eigen::Infinity>());
  const PmpVector& yT = sol.nodes.back();
  const Costate c1 = terminal_costate({yT[0], yT[1]}, cfg);
  const Costate c2 = terminal_costate({yT[2], yT[3]}, cfg);
  worst = std::max({worst, std::abs(yT[4] - c1.l1), std::abs(yT[5] - c1.l2),
                    std::abs(yT[6] - c2.l1), std::abs(yT[7] - c2.l2)});
  return std::isfinite(worst) ? worst : std::numeric_limits<double>::infinity();
}

std::vector<double> interpolant_defects(const std::vector<double>& grid,
                                        const std::vector<PmpVector>& nodes,
                                        const GameConfig& cfg) {
  const std::size_t n = nodes.size();
  std::vector<PmpVector> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = pmp_rhs(nodes[k], cfg);
  std::vector<double> out(n - 1, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = grid[k + 1] - grid[k];
    for (double s : {0.25, 0.75}) {
      const Hermite p = hermite(nodes[k], f[k], nodes[k + 1], f[k + 1], h, s);
      const PmpVector fs = pmp_rhs(p.y, cfg);
      const PmpVector rel = (p.dy - fs).cwiseAbs().cwiseQuotient((fs.cwiseAbs().array() + 1.0).matrix());
      out[k] = std::max(out[k], rel.maxCoeff());
    }
  }
  return out;
}

void write_solution(const BvpSolution& sol, const std::string& csv_path,
                    const std::string& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  csv << "t,d1,v1,d2,v2,lam1_1,lam1_2,lam2_1,lam2_2,u1,u2\n";
  csv << std::setprecision(17);
  for (std::size_t k = 0; k < sol.size(); ++k) {
    csv << sol.grid[k];
    for (int j = 0; j < kDim; ++j) csv << ',' << sol.nodes[k][j];
    csv << ',' << sol.controls[k][0] << ',' << sol.controls[k][1] << '\n';
  }
  nlohmann::json meta = {{"V1", sol.values[0]},
                         {"V2", sol.values[1]},
                         {"converged", sol.converged},
                         {"status", to_string(sol.status)},
                         {"max_defect", sol.max_defect},
                         {"nodes", sol.size()},
                         {"guess", sol.guess_label}};
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot open " + json_path);
  js << meta.dump(2) << '\n';
}

}  // namespace costate
