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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace costate {
namespace {

// Plain long-double evaluation of the logistic product, written without the
// branch tricks of the library version.
long double sigma_oracle(long double d, long double theta, const GameConfig& c) {
  const long double g = c.penalty_gamma;
  const long double rise = 1.0L / (1.0L + std::exp(-g * (d - c.road_R / 2.0L + theta * c.car_W / 2.0L)));
  const long double fall = 1.0L / (1.0L + std::exp(g * (d - (c.road_R + c.car_W) / 2.0L - c.car_L)));
  return rise * fall;
}

JointState far_state() { return {{0.0, 20.0}, {0.0, 20.0}, 0.0}; }

TEST(GameConfig, DefaultsValidate) {
  GameConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.zone_entry(5.0), 31.25);
  EXPECT_DOUBLE_EQ(c.zone_entry(1.0), 34.25);
  EXPECT_DOUBLE_EQ(c.zone_exit(), 38.75);
}

TEST(GameConfig, RejectsBadValues) {
  auto bad = [](auto mutate) {
    GameConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  };
  bad([](GameConfig& c) { c.horizon_T = 0.0; });
  bad([](GameConfig& c) { c.penalty_gamma = -1.0; });
  bad([](GameConfig& c) { c.u_min = 1.0; });
  bad([](GameConfig& c) { c.u_max = -1.0; });
  bad([](GameConfig& c) { c.car_L = 100.0; });
  bad([](GameConfig& c) { c.car_W = 0.0; });
  bad([](GameConfig& c) { c.penalty_b = -1.0; });
}

TEST(Dynamics, DoubleIntegrator) {
  auto [a0, b0] = dynamics_rhs({0.0, 0.0}, 0.0);
  EXPECT_EQ(a0, 0.0);
  EXPECT_EQ(b0, 0.0);
  auto [a1, b1] = dynamics_rhs({10.0, 20.0}, 2.0);
  EXPECT_EQ(a1, 20.0);
  EXPECT_EQ(b1, 2.0);
  auto [a2, b2] = dynamics_rhs({15.0, 18.0}, -3.0);
  EXPECT_EQ(a2, 18.0);
  EXPECT_EQ(b2, -3.0);
}

TEST(Sigma, Tails) {
  GameConfig c;
  EXPECT_EQ(sigma(-1e6, 5.0, c), 0.0);
  EXPECT_EQ(sigma(1e6, 5.0, c), 0.0);
  EXPECT_FALSE(std::isnan(sigma(-1e308, 5.0, c)));
  EXPECT_EQ(sigma_grad(-1e6, 5.0, c), 0.0);
}

TEST(Sigma, MatchesOracleAtRiseAndCenter) {
  GameConfig c;
  const double rise = c.zone_entry(1.0);
  EXPECT_NEAR(sigma(rise, 1.0, c), static_cast<double>(sigma_oracle(rise, 1.0, c)), 1e-15);
  // The fall factor is ~e^-22 away here, so the product is a half.
  GameConfig wide = c;
  wide.car_L = 10.0;
  EXPECT_NEAR(sigma(wide.zone_entry(5.0), 5.0, wide), 0.5, 1e-9);
  const double mid = 0.5 * (c.zone_entry(5.0) + c.zone_exit());
  EXPECT_NEAR(sigma(mid, 5.0, c), 1.0, 1e-3);
  EXPECT_NEAR(sigma(mid, 5.0, c), static_cast<double>(sigma_oracle(mid, 5.0, c)), 1e-15);
}

TEST(Sigma, RangeAndMonotoneFlanks) {
  GameConfig c;
  const double mid = 0.5 * (c.zone_entry(5.0) + c.zone_exit());
  double prev = -1.0;
  for (double d = 20.0; d <= mid; d += 0.01) {
    const double s = sigma(d, 5.0, c);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    EXPECT_GT(s, prev);
    prev = s;
  }
  prev = 2.0;
  for (double d = mid + 0.01; d <= 45.0; d += 0.01) {
    const double s = sigma(d, 5.0, c);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(SigmaGrad, FiniteDifferences) {
  GameConfig c;
  for (double theta : {1.0, 5.0}) {
    for (double d = 28.0; d <= 42.0; d += 0.173) {
      const double h = 1e-6;
      const double fd = (sigma(d + h, theta, c) - sigma(d - h, theta, c)) / (2 * h);
      const double g = sigma_grad(d, theta, c);
      // Central differences carry ~1e-10 round-off on the plateau.
      EXPECT_NEAR(fd, g, 1e-8 + 1e-5 * std::abs(g)) << "d=" << d;
    }
  }
}

TEST(SigmaGrad, QuarterGammaAtRise) {
  GameConfig c;
  c.car_L = 10.0;  // push the fall point away so the other factor is ~1
  EXPECT_NEAR(sigma_grad(c.zone_entry(5.0), 5.0, c), c.penalty_gamma / 4.0, 1e-3);
}

TEST(Penalty, Values) {
  GameConfig c;
  JointState s{{0.0, 20.0}, {0.0, 20.0}, 0.0};
  EXPECT_NEAR(collision_penalty(s, Player::kOne, c), 0.0, 1e-20);
  const double mid5 = 0.5 * (c.zone_entry(5.0) + c.zone_exit());
  const double mid1 = 0.5 * (c.zone_entry(1.0) + c.zone_exit());
  s = {{mid5, 20.0}, {mid1, 20.0}, 0.0};
  const double oracle = c.penalty_b * static_cast<double>(sigma_oracle(mid5, 5.0, c) * sigma_oracle(mid1, 1.0, c));
  EXPECT_NEAR(collision_penalty(s, Player::kOne, c), oracle, 1e-9);
  EXPECT_GT(collision_penalty(s, Player::kOne, c), 0.99 * c.penalty_b);
  s.p2.d = -100.0;
  EXPECT_NEAR(collision_penalty(s, Player::kOne, c), 0.0, 1e-12);
}

TEST(Penalty, GradientMatchesFiniteDifferences) {
  GameConfig c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(28.0, 42.0);
  for (int k = 0; k < 200; ++k) {
    JointState s{{pos(rng), 20.0}, {pos(rng), 20.0}, 0.0};
    for (Player i : {Player::kOne, Player::kTwo}) {
      const double h = 1e-6;
      JointState a = s;
      JointState b = s;
      a.player(i).d += h;
      b.player(i).d -= h;
      const double fd = (collision_penalty(a, i, c) - collision_penalty(b, i, c)) / (2 * h);
      const double g = penalty_grad_own(s, i, c);
      EXPECT_NEAR(fd, g, 1e-4 + 1e-5 * std::abs(g));
    }
  }
}

TEST(Penalty, GradientVanishesFarOrOnPlateau) {
  GameConfig c;
  JointState s{{33.0, 20.0}, {-50.0, 20.0}, 0.0};
  EXPECT_NEAR(penalty_grad_own(s, Player::kOne, c), 0.0, 1e-12);
  const double mid5 = 0.5 * (c.zone_entry(5.0) + c.zone_exit());
  s = {{mid5, 20.0}, {36.5, 20.0}, 0.0};
  EXPECT_LT(std::abs(penalty_grad_own(s, Player::kOne, c)), 1e-2 * c.penalty_b);
}

TEST(Losses, Instantaneous) {
  GameConfig c;
  EXPECT_NEAR(instantaneous_loss(far_state(), Player::kOne, 0.0, c), 0.0, 1e-20);
  EXPECT_NEAR(instantaneous_loss(far_state(), Player::kTwo, 2.0, c), 4.0, 1e-12);
  const double mid5 = 0.5 * (c.zone_entry(5.0) + c.zone_exit());
  JointState s{{mid5, 20.0}, {36.5, 20.0}, 0.0};
  EXPECT_NEAR(instantaneous_loss(s, Player::kOne, 0.0, c), 1e4, 1e2);
}

TEST(Losses, TerminalAndCostate) {
  GameConfig c;
  EXPECT_EQ(terminal_loss({0.0, c.v_bar}, c), 0.0);
  EXPECT_EQ(terminal_loss({10.0, c.v_bar}, c), -10.0);
  EXPECT_EQ(terminal_loss({0.0, c.v_bar + 3.0}, c), 9.0);

  auto lam = terminal_costate({0.0, c.v_bar}, c);
  EXPECT_EQ(lam.l1, c.alpha);
  EXPECT_EQ(lam.l2, 0.0);
  lam = terminal_costate({0.0, c.v_bar + 1.0}, c);
  EXPECT_EQ(lam.l2, -2.0);
  lam = terminal_costate({0.0, c.v_bar - 2.5}, c);
  EXPECT_EQ(lam.l2, 5.0);
}

TEST(Losses, TerminalCostateIsMinusGradient) {
  GameConfig c;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 50; ++k) {
    const PlayerState x{u(rng), u(rng)};
    const Costate lam = terminal_costate(x, c);
    // Analytic gradient of -alpha d + (v - v_bar)^2.
    EXPECT_EQ(lam.l1, -(-c.alpha));
    EXPECT_EQ(lam.l2, -(2.0 * (x.v - c.v_bar)));
  }
}

TEST(Hamiltonian, Values) {
  GameConfig c;
  EXPECT_NEAR(hamiltonian(far_state(), 0.0, {0.0, 0.0}, Player::kOne, c), 0.0, 1e-20);
  JointState s = far_state();
  s.p1.v = 10.0;
  EXPECT_NEAR(hamiltonian(s, 2.0, {1.0, 4.0}, Player::kOne, c), 14.0, 1e-12);
}

TEST(Hamiltonian, MaximizedByOptimalControl) {
  GameConfig c;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> l(-40.0, 40.0);
  std::uniform_real_distribution<double> pos(25.0, 45.0);
  for (int k = 0; k < 100; ++k) {
    JointState s{{pos(rng), 20.0}, {pos(rng), 22.0}, 0.0};
    const Costate lam{l(rng), l(rng)};
    const double ustar = optimal_control(lam, c);
    const double hstar = hamiltonian(s, ustar, lam, Player::kTwo, c);
    for (double u = c.u_min; u <= c.u_max; u += 0.05) {
      EXPECT_GE(hstar + 1e-9, hamiltonian(s, u, lam, Player::kTwo, c));
    }
    // Unconstrained maximizer sits at 0.5 l2.
    const double hu = hamiltonian(s, 0.5 * lam.l2, lam, Player::kTwo, c);
    EXPECT_GE(hu + 1e-9, hamiltonian(s, 0.5 * lam.l2 + 0.1, lam, Player::kTwo, c));
    EXPECT_GE(hu + 1e-9, hamiltonian(s, 0.5 * lam.l2 - 0.1, lam, Player::kTwo, c));
  }
}

TEST(OptimalControl, Clamps) {
  GameConfig c;
  EXPECT_EQ(optimal_control({1.0, 0.0}, c), 0.0);
  EXPECT_EQ(optimal_control({1.0, 4.0}, c), 2.0);
  EXPECT_EQ(optimal_control({1.0, 1000.0}, c), 10.0);
  EXPECT_EQ(optimal_control({1.0, -1000.0}, c), -5.0);
}

TEST(PmpRhs, FarFromZone) {
  GameConfig c;
  PmpState ps{far_state(), {c.alpha, 0.0}, {c.alpha, 0.0}};
  const PmpState r = pmp_rhs(ps, c);
  EXPECT_NEAR(r.lam1.l1, 0.0, 1e-100);
  EXPECT_EQ(r.lam1.l2, -c.alpha);
  EXPECT_EQ(r.lam2.l2, -c.alpha);
  EXPECT_EQ(r.joint.p1.v, 0.0);
  EXPECT_EQ(r.joint.p2.v, 0.0);
}

TEST(PmpRhs, StructureAndAutonomy) {
  GameConfig c;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(25.0, 45.0);
  std::uniform_real_distribution<double> l(-100.0, 100.0);
  for (int k = 0; k < 100; ++k) {
    PmpState ps{{{pos(rng), 20.0 + l(rng) / 50}, {pos(rng), 19.0}, 0.0}, {l(rng), l(rng)}, {l(rng), l(rng)}};
    const PmpState r = pmp_rhs(ps, c);
    EXPECT_EQ(r.lam1.l2, -ps.lam1.l1);
    EXPECT_EQ(r.lam2.l2, -ps.lam2.l1);
    EXPECT_EQ(r.lam1.l1, penalty_grad_own(ps.joint, Player::kOne, c));
    EXPECT_EQ(r.lam2.l1, penalty_grad_own(ps.joint, Player::kTwo, c));
    auto [dd1, dv1] = dynamics_rhs(ps.joint.p1, optimal_control(ps.lam1, c));
    auto [dd2, dv2] = dynamics_rhs(ps.joint.p2, optimal_control(ps.lam2, c));
    EXPECT_EQ(r.joint.p1.d, dd1);
    EXPECT_EQ(r.joint.p1.v, dv1);
    EXPECT_EQ(r.joint.p2.d, dd2);
    EXPECT_EQ(r.joint.p2.v, dv2);

    PmpState later = ps;
    later.joint.t = 2.5;
    EXPECT_EQ(pmp_rhs(later, c).to_vector(), r.to_vector());
    EXPECT_EQ(pmp_rhs(ps.to_vector(), c), r.to_vector());
  }
}

TEST(PmpState, VectorRoundTrip) {
  PmpState ps{{{1.0, 2.0}, {3.0, 4.0}, 0.5}, {5.0, 6.0}, {7.0, 8.0}};
  const PmpState back = PmpState::from_vector(ps.to_vector(), 0.5);
  EXPECT_EQ(back.to_vector(), ps.to_vector());
  EXPECT_EQ(back.joint.t, 0.5);
}

}  // namespace
}  // namespace costate
