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
// Two-point boundary value solver for the PMP system of the intersection game.
//
// States carry initial conditions at t0, co-states carry terminal conditions
// at T. The system is discretized with 3-stage Lobatto IIIA collocation
// (Hermite-Simpson, 4th order) and solved by damped Newton with a
// finite-difference Jacobian. After Newton converges, intervals whose cubic
// interpolant violates the ODE are bisected and the problem is re-solved.
//
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include "costate/game_model.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace costate {

struct SolverConfig {
  int initial_nodes = 61;
  int max_nodes = 601;
  int max_newton_iterations = 200;
  int max_step_halvings = 10;
  // Converged when the collocation/boundary residual drops below this.
  double defect_tol = 1.0e-6;
  // Newton keeps iterating towards this before declaring convergence.
  double newton_tol = 1.0e-10;
  // Relative interpolant residual that triggers bisection of an interval.
  double refine_tol = 1.0e-6;
  int max_refinements = 8;
  // Fractions of penalty_b solved in sequence by solve(); the last stage is
  // always the full penalty. {1.0} is a direct solve.
  std::vector<double> penalty_ramp = {1.0};
  // solve_best retries every guess with this ramp (empty disables). Direct
  // and continuation solves from the same guess often reach different
  // equilibria.
  std::vector<double> continuation_ramp = {0.01, 0.1, 0.3, 1.0};
};

enum class SolveStatus { kConverged, kNonConvergence, kSingularJacobian };

std::string to_string(SolveStatus s);

struct BvpSolution {
  std::vector<double> grid;
  std::vector<PmpVector> nodes;
  // Derivatives f(y) at every node (part of the collocation representation).
  std::vector<PmpVector> slopes;
  std::vector<std::array<double, 2>> controls;
  std::array<double, 2> values{0.0, 0.0};
  bool converged = false;
  SolveStatus status = SolveStatus::kNonConvergence;
  double max_defect = 0.0;
  int newton_iterations = 0;
  std::string guess_label;

  std::size_t size() const { return grid.size(); }
  double t0() const { return grid.front(); }
  double tf() const { return grid.back(); }

  JointState state(std::size_t k) const;
  Costate costate(std::size_t k, Player i) const;

  // Cubic Hermite evaluation of the collocation polynomial at any t in the
  // grid range.
  PmpVector interpolate(double t) const;
};

struct GuessTrajectory {
  std::string label;
  std::vector<double> grid;
  std::vector<PmpVector> nodes;
};

class AllGuessesFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Labels are "nominal", "p1_first", "p2_first".
std::vector<GuessTrajectory> initial_guesses(const JointState& x0, const GameConfig& cfg,
                                             const SolverConfig& sc = {});

BvpSolution solve(const JointState& x0, const GuessTrajectory& guess, const GameConfig& cfg,
                  const SolverConfig& sc = {});

// Solves from every guess (directly and along continuation_ramp) and keeps
// the converged solution with the lowest V1 + V2. Throws AllGuessesFailed
// when nothing converges.
BvpSolution solve_best(const JointState& x0, const GameConfig& cfg, const SolverConfig& sc = {});

// Accumulated loss from the start of the grid to T plus terminal loss.
std::array<double, 2> compute_values(const BvpSolution& sol, const GameConfig& cfg);

// Same, but integrating only from t_start (which may fall between nodes).
std::array<double, 2> values_from(const BvpSolution& sol, double t_start, const GameConfig& cfg);

// Max over intervals of |(y_{k+1} - y_k)/h - Simpson average of f| plus the
// boundary condition violations (initial state against sol's first node
// and terminal co-state against terminal_costate).
double residual(const BvpSolution& sol, const JointState& x0, const GameConfig& cfg);

// Relative residual of the cubic interpolant at the quarter points of each
// interval. Drives mesh refinement.
std::vector<double> interpolant_defects(const std::vector<double>& grid,
                                        const std::vector<PmpVector>& nodes,
                                        const GameConfig& cfg);

// Fills slopes, controls, values from grid and nodes.
void finalize_solution(BvpSolution& sol, const GameConfig& cfg);

// Columnar CSV (t, d1, v1, d2, v2, lam1_1, lam1_2, lam2_1, lam2_2, u1, u2)
// plus a JSON sidecar with values, converged flag, max_defect.
void write_solution(const BvpSolution& sol, const std::string& csv_path,
                    const std::string& json_path);

}  // namespace costate
