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
#include "costate/costate_repr.hpp"
#include "lq_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

namespace costate {
namespace {

using testing::LqPlayer;
using testing::lq_node;

GameConfig no_penalty() {
  GameConfig c;
  c.penalty_b = 0.0;
  return c;
}

double sup_vs_lq(const BvpSolution& s, const JointState& x0, const GameConfig& c) {
  double sup = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    sup = std::max(sup, (s.nodes[k] - lq_node(x0, s.grid[k], c)).cwiseAbs().maxCoeff());
  }
  return sup;
}

BvpSolution lq_solution(const JointState& x0, const GameConfig& c, int n) {
  BvpSolution s;
  for (int k = 0; k < n; ++k) {
    const double t = x0.t + (c.horizon_T - x0.t) * k / (n - 1);
    s.grid.push_back(t);
    s.nodes.push_back(lq_node(x0, t, c));
  }
  finalize_solution(s, c);
  return s;
}

// Guarantees of every converged solution.
void expect_pmp_compliant(const BvpSolution& s, const JointState& x0, const GameConfig& c) {
  ASSERT_TRUE(s.converged);
  EXPECT_LT(s.max_defect, 1e-6);
  EXPECT_EQ(s.nodes.front()[0], x0.p1.d);
  EXPECT_EQ(s.nodes.front()[1], x0.p1.v);
  EXPECT_EQ(s.nodes.front()[2], x0.p2.d);
  EXPECT_EQ(s.nodes.front()[3], x0.p2.v);
  const JointState xT = s.state(s.size() - 1);
  for (Player i : {Player::kOne, Player::kTwo}) {
    const Costate want = terminal_costate(xT.player(i), c);
    const Costate got = s.costate(s.size() - 1, i);
    EXPECT_LT(std::abs(got.l1 - want.l1), 1e-9);
    EXPECT_LT(std::abs(got.l2 - want.l2), 1e-9);
  }
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_EQ(s.controls[k][0], optimal_control(s.costate(k, Player::kOne), c));
    EXPECT_EQ(s.controls[k][1], optimal_control(s.costate(k, Player::kTwo), c));
  }
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GT(s.grid[k], s.grid[k - 1]);
}

TEST(InitialGuesses, LabelsAndBoundaryValues) {
  GameConfig c;
  const JointState x0{{17.0, 21.0}, {16.0, 23.0}, 0.4};
  const auto guesses = initial_guesses(x0, c);
  ASSERT_EQ(guesses.size(), 3u);
  EXPECT_EQ(guesses[0].label, "nominal");
  EXPECT_EQ(guesses[1].label, "p1_first");
  EXPECT_EQ(guesses[2].label, "p2_first");
  for (const auto& g : guesses) {
    EXPECT_EQ(g.grid.front(), x0.t);
    EXPECT_EQ(g.grid.back(), c.horizon_T);
    const PmpVector& y0 = g.nodes.front();
    EXPECT_EQ(y0[0], x0.p1.d);
    EXPECT_EQ(y0[1], x0.p1.v);
    EXPECT_EQ(y0[2], x0.p2.d);
    EXPECT_EQ(y0[3], x0.p2.v);
    const PmpState end = PmpState::from_vector(g.nodes.back(), c.horizon_T);
    EXPECT_NEAR(end.lam1.l2, terminal_costate(end.joint.p1, c).l2, 1e-12);
    EXPECT_NEAR(end.lam2.l2, terminal_costate(end.joint.p2, c).l2, 1e-12);
    EXPECT_EQ(end.lam1.l1, c.alpha);
  }
  // Nominal: constant speed, linear position.
  const auto& nom = guesses[0];
  for (std::size_t k = 0; k < nom.grid.size(); ++k) {
    const double s = nom.grid[k] - x0.t;
    EXPECT_EQ(nom.nodes[k][1], x0.p1.v);
    EXPECT_NEAR(nom.nodes[k][0], x0.p1.d + x0.p1.v * s, 1e-12);
    EXPECT_NEAR(nom.nodes[k][2], x0.p2.d + x0.p2.v * s, 1e-12);
  }
}

TEST(Solve, MatchesAnalyticSolutionWithoutPenalty) {
  const GameConfig c = no_penalty();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(15.0, 20.0);
  std::uniform_real_distribution<double> v(18.0, 25.0);
  std::uniform_real_distribution<double> t(0.0, 2.0);
  for (int k = 0; k < 5; ++k) {
    const JointState x0{{d(rng), v(rng)}, {d(rng), v(rng)}, k == 0 ? 0.0 : t(rng)};
    for (const auto& g : initial_guesses(x0, c)) {
      const BvpSolution s = solve(x0, g, c);
      expect_pmp_compliant(s, x0, c);
      EXPECT_LT(sup_vs_lq(s, x0, c), 1e-6);
      const LqPlayer p1(x0.p1, x0.t, c);
      EXPECT_NEAR(s.nodes.back()[1], p1.vT, 1e-6);
    }
  }
}

TEST(Solve, LeaderFarAheadBehavesLikeNoPenalty) {
  const GameConfig c;
  const JointState x0{{20.0, 25.0}, {15.0, 18.0}, 0.0};
  const BvpSolution s = solve_best(x0, c);
  expect_pmp_compliant(s, x0, c);
  std::vector<double> grid;
  std::vector<double> l1;
  std::vector<double> l2;
  for (double t = 0.0; t <= c.horizon_T + 1e-12; t += 0.01) {
    const double tt = std::min(t, c.horizon_T);
    grid.push_back(tt);
    const PmpVector y = s.interpolate(tt);
    l1.push_back(y[4]);
    l2.push_back(y[6]);
  }
  // The logistic tails leave a residual window four orders below a close call.
  EXPECT_LT(std::abs(fit_params(grid, l1, s.nodes.back()[5], c).q), 0.05 * c.alpha);
  EXPECT_LT(std::abs(fit_params(grid, l2, s.nodes.back()[7], c).q), 0.05 * c.alpha);
  const GameConfig free = no_penalty();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const PmpVector ref = lq_node(x0, s.grid[k], free);
    for (int j : {0, 1, 2, 3, 5, 7}) {
      EXPECT_LT(std::abs(s.nodes[k][j] - ref[j]), 0.01 * std::max(1.0, std::abs(ref[j]))) << j;
    }
  }
}

TEST(Solve, SwappingPlayersSwapsTheSolution) {
  const GameConfig c;
  const JointState x0{{17.5, 21.0}, {16.5, 22.5}, 0.0};
  const auto guesses = initial_guesses(x0, c);
  const auto& g = guesses[1];
  GuessTrajectory gs = g;
  for (auto& y : gs.nodes) {
    const PmpVector o = y;
    y << o[2], o[3], o[0], o[1], o[6], o[7], o[4], o[5];
  }
  const BvpSolution a = solve(x0, g, c);
  const BvpSolution b = solve(x0.swapped(), gs, c);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const PmpVector& y = a.nodes[k];
    PmpVector ys;
    ys << y[2], y[3], y[0], y[1], y[6], y[7], y[4], y[5];
    EXPECT_LT((ys - b.nodes[k]).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + y.cwiseAbs().maxCoeff()));
  }
  EXPECT_NEAR(a.values[0], b.values[1], 1e-6 * std::abs(a.values[0]));
}

TEST(Solve, Deterministic) {
  const GameConfig c;
  const JointState x0{{18.0, 20.0}, {17.0, 21.0}, 0.0};
  const auto g = initial_guesses(x0, c)[0];
  const BvpSolution a = solve(x0, g, c);
  const BvpSolution b = solve(x0, g, c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.nodes[k], b.nodes[k]);
  EXPECT_EQ(a.values, b.values);
}

TEST(Solve, CloseCallIsPmpCompliantWithIntegralIdentity) {
  const GameConfig c;
  const JointState x0{{17.0, 21.0}, {16.8, 21.5}, 0.0};
  const BvpSolution s = solve_best(x0, c);
  expect_pmp_compliant(s, x0, c);
  // lam[2](t) = lam[2](T) + int_t^T lam[1] by Simpson with the Hermite midpoint.
  for (int col : {4, 6}) {
    double integral = 0.0;
    for (std::size_t k = s.size() - 1; k > 0; --k) {
      const double h = s.grid[k] - s.grid[k - 1];
      const double mid = s.interpolate(0.5 * (s.grid[k] + s.grid[k - 1]))[col];
      integral += h / 6.0 * (s.nodes[k][col] + 4.0 * mid + s.nodes[k - 1][col]);
      const double want = s.nodes.back()[col + 1] + integral;
      EXPECT_NEAR(s.nodes[k - 1][col + 1], want, 1e-6 * (1.0 + std::abs(want)));
    }
  }
}

TEST(SolveBest, NoPenaltyAllGuessesAgree) {
  const GameConfig c = no_penalty();
  const JointState x0{{16.0, 19.0}, {18.0, 24.0}, 0.0};
  std::vector<BvpSolution> all;
  for (const auto& g : initial_guesses(x0, c)) all.push_back(solve(x0, g, c));
  for (const auto& s : all) {
    ASSERT_TRUE(s.converged);
    EXPECT_LT(sup_vs_lq(s, x0, c), 1e-6);
  }
  const BvpSolution best = solve_best(x0, c);
  EXPECT_LT(best.max_defect, 1e-6);
  EXPECT_LT(sup_vs_lq(best, x0, c), 1e-6);
}

TEST(SolveBest, PicksLowerTotalLossBranch) {
  const GameConfig c;
  // Near-symmetric start: either player can go first.
  const JointState x0{{17.5, 21.5}, {17.4, 21.5}, 0.0};
  const auto guesses = initial_guesses(x0, c);
  const BvpSolution a = solve(x0, guesses[1], c);
  const BvpSolution b = solve(x0, guesses[2], c);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  // Two distinct equilibria: the yielding player differs.
  EXPECT_GT(std::abs(a.values[0] - b.values[0]), 10.0);
  const BvpSolution best = solve_best(x0, c);
  const double best_total = best.values[0] + best.values[1];
  EXPECT_LE(best_total, a.values[0] + a.values[1] + 1e-9);
  EXPECT_LE(best_total, b.values[0] + b.values[1] + 1e-9);
  EXPECT_LT(best.max_defect, 1e-6);
}

TEST(Values, ZeroControlZeroPenalty) {
  GameConfig c = no_penalty();
  BvpSolution s;
  for (int k = 0; k < 31; ++k) {
    const double t = c.horizon_T * k / 30;
    PmpVector y;
    y << 10.0 + 20.0 * t, 20.0, 12.0 + 19.0 * t, 19.0, c.alpha, 0.0, c.alpha, 0.0;
    s.grid.push_back(t);
    s.nodes.push_back(y);
  }
  finalize_solution(s, c);
  const auto v = compute_values(s, c);
  EXPECT_NEAR(v[0], terminal_loss({10.0 + 20.0 * c.horizon_T, 20.0}, c), 1e-12);
  EXPECT_NEAR(v[1], terminal_loss({12.0 + 19.0 * c.horizon_T, 19.0}, c), 1e-12);
}

TEST(Values, AnalyticNoPenaltyValue) {
  const GameConfig c = no_penalty();
  const JointState x0{{15.5, 24.0}, {19.0, 18.5}, 0.0};
  const BvpSolution s = solve_best(x0, c);
  EXPECT_NEAR(s.values[0], LqPlayer(x0.p1, 0.0, c).value(c), 1e-4);
  EXPECT_NEAR(s.values[1], LqPlayer(x0.p2, 0.0, c).value(c), 1e-4);
  // Partial-horizon values of the same trajectory equal the LQ value of the
  // game restarted on it (the LQ solution is time consistent).
  const double t0 = 1.234;
  const PmpVector y = s.interpolate(t0);
  const auto part = values_from(s, t0, c);
  EXPECT_NEAR(part[0], LqPlayer({y[0], y[1]}, t0, c).value(c), 1e-4);
  EXPECT_NEAR(part[1], LqPlayer({y[2], y[3]}, t0, c).value(c), 1e-4);
}

TEST(Values, MeshRefinementChangesLittle) {
  const GameConfig c;
  const JointState x0{{17.0, 21.0}, {16.8, 21.5}, 0.0};
  const auto g = initial_guesses(x0, c)[1];
  SolverConfig coarse;
  SolverConfig fine;
  fine.max_nodes = 1201;
  fine.max_refinements = 12;
  const BvpSolution a = solve(x0, g, c, coarse);
  const BvpSolution b = solve(x0, g, c, fine);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT(std::abs(a.values[i] - b.values[i]) / std::abs(b.values[i]), 1e-4);
  }
  double sup = 0.0;
  for (double t = 0.0; t <= c.horizon_T; t += 0.005) {
    sup = std::max(sup, (a.interpolate(t) - b.interpolate(t)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(sup, 1e-4);
}

TEST(Residual, AnalyticSolutionIsTiny) {
  const GameConfig c = no_penalty();
  const JointState x0{{16.0, 22.0}, {19.0, 20.0}, 0.0};
  const BvpSolution s = lq_solution(x0, c, 61);
  EXPECT_LT(residual(s, x0, c), 1e-8);
}

TEST(Residual, DetectsPerturbedCostate) {
  const GameConfig c = no_penalty();
  const JointState x0{{16.0, 22.0}, {19.0, 20.0}, 0.0};
  BvpSolution s = lq_solution(x0, c, 61);
  for (auto& y : s.nodes) y[5] += 0.1;
  finalize_solution(s, c);
  EXPECT_GT(residual(s, x0, c), 1e-3);
}

TEST(Interpolate, HitsNodesAndStaysSmooth) {
  const GameConfig c = no_penalty();
  const JointState x0{{16.0, 22.0}, {19.0, 20.0}, 0.0};
  const BvpSolution s = lq_solution(x0, c, 31);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_EQ(s.interpolate(s.grid[k]), s.nodes[k]);
  // Cubic Hermite reproduces the cubic position exactly.
  for (double t = 0.013; t < c.horizon_T; t += 0.1) {
    EXPECT_NEAR(s.interpolate(t)[0], lq_node(x0, t, c)[0], 1e-10);
  }
}

TEST(WriteSolution, CsvAndSidecar) {
  const GameConfig c = no_penalty();
  const JointState x0{{16.0, 22.0}, {19.0, 20.0}, 0.0};
  const BvpSolution s = solve_best(x0, c);
  const auto dir = std::filesystem::temp_directory_path() / "costate_bvp_test";
  std::filesystem::create_directories(dir);
  write_solution(s, (dir / "sol.csv").string(), (dir / "sol.json").string());
  std::ifstream csv(dir / "sol.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,d1,v1,d2,v2,lam1_1,lam1_2,lam2_1,lam2_2,u1,u2");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) rows += line.empty() ? 0 : 1;
  EXPECT_EQ(rows, static_cast<int>(s.size()));
  std::ifstream js(dir / "sol.json");
  const auto j = nlohmann::json::parse(js);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_DOUBLE_EQ(j.at("V1").get<double>(), s.values[0]);
  EXPECT_DOUBLE_EQ(j.at("max_defect").get<double>(), s.max_defect);
}

}  // namespace
}  // namespace costate
