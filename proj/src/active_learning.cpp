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

#include "costate/active_learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace costate {

void ActiveConfig::validate(int pool_size) const {
  if (candidates_per_iter < 1 || picks_per_iter < 1) {
    throw std::invalid_argument("candidates and picks per iteration must be positive");
  }
  if (picks_per_iter > candidates_per_iter) {
    throw std::invalid_argument("picks_per_iter exceeds candidates_per_iter");
  }
  if (budget < 0 || budget > pool_size) {
    throw std::invalid_argument("budget must lie in [0, pool size]");
  }
  if (!(rollout_step > 0.0) || inverse_substeps < 1 || !(blowup_cap > 0.0)) {
    throw std::invalid_argument("invalid rollout settings");
  }
}

std::vector<double> rollout_grid(double t0, double horizon_T, double step) {
  const double span = horizon_T - t0;
  const int n = std::max(1, static_cast<int>(std::ceil(span / step - 1e-9)));
  std::vector<double> g(n + 1);
  for (int k = 0; k <= n; ++k) g[k] = t0 + span * k / n;
  g.back() = horizon_T;
  return g;
}

namespace {

double raw_control(const CostateParams& p, double t, const GameConfig& cfg) {
  return 0.5 * reconstruct_lambda2(p, t, cfg);
}

double clamped(double u, const GameConfig& cfg) { return std::clamp(u, cfg.u_min, cfg.u_max); }

// Exact update of a double integrator whose control is linear on [0, h].
void advance(PlayerState& x, double u0, double u1, double h) {
  const double k = (u1 - u0) / h;
  x.d += x.v * h + 0.5 * u0 * h * h + k * h * h * h / 6.0;
  x.v += u0 * h + 0.5 * k * h * h;
}

void add_clamp_crossings(const CostateParams& p, double a, double b, const GameConfig& cfg,
                         std::vector<double>& cuts) {
  const double ua = raw_control(p, a, cfg);
  const double ub = raw_control(p, b, cfg);
  for (double bound : {cfg.u_min, cfg.u_max}) {
    if ((ua - bound) * (ub - bound) < 0.0) cuts.push_back(a + (b - a) * (bound - ua) / (ub - ua));
  }
}

}  // namespace

RolloutTrajectory forward_rollout(const JointState& x0, const ParamPair& params, const GameConfig& cfg,
                                  double step) {
  const std::array<const CostateParams*, 2> p{&params.first, &params.second};
  RolloutTrajectory r;
  r.t = rollout_grid(x0.t, cfg.horizon_T, step);
  JointState x = x0;
  auto controls = [&](double t) {
    return std::array<double, 2>{clamped(raw_control(*p[0], t, cfg), cfg),
                                 clamped(raw_control(*p[1], t, cfg), cfg)};
  };

  r.x.push_back(x);
  r.u.push_back(controls(x.t));
  for (std::size_t k = 0; k + 1 < r.t.size(); ++k) {
    const double a = r.t[k];
    const double b = r.t[k + 1];
    std::vector<double> cuts{a, b};
    for (const auto* pi : p) {
      for (double s : {pi->t_in, pi->t_out}) {
        if (s > a && s < b) cuts.push_back(s);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    // Between window breakpoints lam[2] is linear; add the clamp kinks.
    const std::vector<double> pieces = cuts;
    for (std::size_t m = 0; m + 1 < pieces.size(); ++m) {
      for (const auto* pi : p) add_clamp_crossings(*pi, pieces[m], pieces[m + 1], cfg, cuts);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t m = 0; m + 1 < cuts.size(); ++m) {
      const double h = cuts[m + 1] - cuts[m];
      if (!(h > 0.0)) continue;
      const auto u0 = controls(cuts[m]);
      const auto u1 = controls(cuts[m + 1]);
      advance(x.p1, u0[0], u1[0], h);
      advance(x.p2, u0[1], u1[1], h);
    }
    x.t = b;
    r.x.push_back(x);
    r.u.push_back(controls(b));
  }
  return r;
}

CostateTrajectory inverse_rollout(const JointState& xT, const Costate& lamT1, const Costate& lamT2,
                                  double t0, const GameConfig& cfg, const ActiveConfig& ac) {
  CostateTrajectory out;
  out.t = rollout_grid(t0, cfg.horizon_T, ac.rollout_step);
  const std::size_t n = out.t.size();
  out.lam1.resize(n);
  out.lam2.resize(n);

  PmpVector y = PmpState{xT, lamT1, lamT2}.to_vector();
  auto record = [&](std::size_t k) {
    out.lam1[k] = {y[4], y[5]};
    out.lam2[k] = {y[6], y[7]};
  };
  record(n - 1);
  for (std::size_t k = n - 1; k > 0; --k) {
    const double h = -(out.t[k] - out.t[k - 1]) / ac.inverse_substeps;
    for (int s = 0; s < ac.inverse_substeps; ++s) {
      const PmpVector k1 = pmp_rhs(y, cfg);
      const PmpVector k2 = pmp_rhs(y + 0.5 * h * k1, cfg);
      const PmpVector k3 = pmp_rhs(y + 0.5 * h * k2, cfg);
      const PmpVector k4 = pmp_rhs(y + h * k3, cfg);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!y.allFinite() || y.cwiseAbs().maxCoeff() > ac.blowup_cap) {
        throw BlowUp("inverse rollout exceeded the magnitude cap");
      }
    }
    record(k - 1);
  }
  return out;
}

double acquisition(const JointState& x0, const ParamPair& params, const GameConfig& cfg,
                   const ActiveConfig& ac) {
  const RolloutTrajectory fwd = forward_rollout(x0, params, cfg, ac.rollout_step);
  const double T = cfg.horizon_T;
  CostateTrajectory inv;
  try {
    inv = inverse_rollout(fwd.x.back(), reconstruct(params.first, T, cfg),
                          reconstruct(params.second, T, cfg), x0.t, cfg, ac);
  } catch (const BlowUp&) {
    return ac.blowup_cap;
  }
  std::vector<double> sq(inv.t.size());
  for (std::size_t k = 0; k < inv.t.size(); ++k) {
    const Costate a = reconstruct(params.first, inv.t[k], cfg);
    const Costate b = reconstruct(params.second, inv.t[k], cfg);
    const double e[] = {a.l1 - inv.lam1[k].l1, a.l2 - inv.lam1[k].l2, b.l1 - inv.lam2[k].l1,
                        b.l2 - inv.lam2[k].l2};
    sq[k] = e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + e[3] * e[3];
  }
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < sq.size(); ++k) {
    integral += 0.5 * (sq[k] + sq[k + 1]) * (inv.t[k + 1] - inv.t[k]);
  }
  return std::min(std::sqrt(integral), ac.blowup_cap);
}

double acquisition(const JointState& x0, const CostateNet& net, const GameConfig& cfg,
                   const ActiveConfig& ac) {
  return acquisition(x0, net.predict_costate(x0), cfg, ac);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> costate_training_data(const std::vector<SampleRecord>& records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd x(5, n);
  Eigen::MatrixXd y(8, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const SampleRecord& r = records[static_cast<std::size_t>(k)];
    x.col(k) = network_input(r.joint());
    y.col(k) = costate_label_vector(r.costate1, r.costate2);
  }
  return {x, y};
}

TrainHistory train_costate_net(CostateNet& net, const std::vector<SampleRecord>& train,
                               const std::vector<SampleRecord>& validation, const TrainConfig& tc,
                               bool fit_scaling, double range_margin) {
  if (train.empty() || validation.empty()) throw std::invalid_argument("empty training or validation set");
  auto [tx, ty] = costate_training_data(train);
  auto [vx, vy] = costate_training_data(validation);
  if (fit_scaling) {
    net.normalizer() = InputNormalizer::fit(tx);
    net.range() = OutputRange::fit(ty, range_margin);
  }
  return train_full_batch(net, tx, net.range().to_unit(ty), vx, net.range().to_unit(vy), tc);
}

ActiveResult active_loop(std::vector<SampleRecord> train, const std::vector<Point4>& pool,
                         const Labeler& labeler, const std::vector<SampleRecord>& validation,
                         CostateNet& net, const ActiveConfig& ac, const ActiveTrainSettings& ts,
                         const GameConfig& cfg) {
  ac.validate(static_cast<int>(pool.size()));
  ActiveResult res;
  res.train = std::move(train);
  std::vector<int> remaining(pool.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::mt19937_64 rng(ac.seed);
  int acquired = 0;

  while (acquired < ac.budget && !remaining.empty()) {
    ++res.iterations;
    // Partial Fisher-Yates: the first m entries become the candidates.
    const int m = std::min<int>(ac.candidates_per_iter, static_cast<int>(remaining.size()));
    for (int k = 0; k < m; ++k) {
      std::uniform_int_distribution<int> pick(k, static_cast<int>(remaining.size()) - 1);
      std::swap(remaining[k], remaining[pick(rng)]);
    }

    std::vector<AcquisitionLogRow> rows(m);
    parallel_for(m, ac.threads, [&](int c) {
      AcquisitionLogRow& row = rows[c];
      row.iteration = res.iterations;
      row.pool_index = remaining[c];
      row.x0 = pool[remaining[c]];
      row.score = -1.0;
      for (double t0 : ts.time_grid) {
        const JointState x{{row.x0[0], row.x0[1]}, {row.x0[2], row.x0[3]}, t0};
        const double s = acquisition(x, net, cfg, ac);
        if (s > row.score) {
          row.score = s;
          row.t0_argmax = t0;
        }
      }
    });

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rows[a].score > rows[b].score; });

    // Failed labels are replaced by the next best candidate.
    const int wanted = std::min(ac.picks_per_iter, ac.budget - acquired);
    int got = 0;
    std::vector<bool> consumed(m, false);
    for (int c : order) {
      if (got == wanted) break;
      consumed[c] = true;
      try {
        auto recs = labeler(rows[c].pool_index);
        res.train.insert(res.train.end(), recs.begin(), recs.end());
        res.labeled.push_back(rows[c].pool_index);
        rows[c].picked = true;
        ++got;
      } catch (const AllGuessesFailed&) {
        res.failed.push_back(rows[c].pool_index);
      }
    }
    acquired += got;
    res.log.insert(res.log.end(), rows.begin(), rows.end());

    std::vector<int> next;
    for (int k = 0; k < static_cast<int>(remaining.size()); ++k) {
      if (k >= m || !consumed[k]) next.push_back(remaining[k]);
    }
    remaining = std::move(next);

    if (got > 0) {
      if (!ac.warm_start) net = CostateNet(ts.train.seed, cfg.horizon_T);
      res.last_history = train_costate_net(net, res.train, validation, ts.train, !ac.warm_start, ts.range_margin);
    }
  }
  return res;
}

void write_acquisition_log(const std::vector<AcquisitionLogRow>& log, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + csv_path);
  out << "iteration,pool_index,d1,v1,d2,v2,t0_argmax,score,picked\n";
  char buf[64];
  for (const auto& r : log) {
    out << r.iteration << ',' << r.pool_index;
    for (double v : {r.x0[0], r.x0[1], r.x0[2], r.x0[3], r.t0_argmax, r.score}) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << ',' << (r.picked ? 1 : 0) << '\n';
  }
}

}  // namespace costate
