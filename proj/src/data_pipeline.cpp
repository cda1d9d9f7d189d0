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

#include "costate/data_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace costate {

bool SampleBox::contains(const Point4& p) const {
  for (int k = 0; k < 4; ++k) {
    if (p[k] < lo[k] || p[k] > hi[k]) return false;
  }
  return true;
}

SamplerConfig SamplerConfig::full() {
  SamplerConfig s;
  s.n_train = 1573;
  s.n_acquisition = 1000;
  s.n_test = 575;
  s.n_validation = 400;
  return s;
}

std::vector<double> SamplerConfig::time_grid() const {
  std::vector<double> g(t0_steps + 1);
  for (int k = 0; k <= t0_steps; ++k) g[k] = t0_max * k / t0_steps;
  return g;
}

void SamplerConfig::validate() const {
  if (n_train <= 0 || n_acquisition <= 0 || n_test <= 0 || n_validation <= 0) {
    throw std::invalid_argument("sample counts must be positive");
  }
  for (int k = 0; k < 4; ++k) {
    if (!(box.hi[k] > box.lo[k])) throw std::invalid_argument("sampling box is degenerate");
  }
  if (t0_steps < 1 || !(t0_max >= 0.0)) throw std::invalid_argument("invalid time grid");
}

std::vector<Point4> lhs_sample(int n, const SampleBox& box, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("lhs_sample needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  std::vector<Point4> pts(n);
  std::vector<int> perm(n);
  for (int dim = 0; dim < 4; ++dim) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const double width = (box.hi[dim] - box.lo[dim]) / n;
    for (int k = 0; k < n; ++k) {
      double x = box.lo[dim] + (perm[k] + jitter(rng)) * width;
      // Stay inside the half-open stratum despite rounding.
      const double upper = box.lo[dim] + (perm[k] + 1) * width;
      if (x >= upper) x = std::nextafter(upper, box.lo[dim]);
      pts[k][dim] = x;
    }
  }
  return pts;
}

std::vector<int> Dataset::solution_ids() const {
  std::vector<int> ids;
  std::set<int> seen;
  for (const auto& r : records) {
    if (seen.insert(r.solution_id).second) ids.push_back(r.solution_id);
  }
  return ids;
}

std::vector<SampleRecord> Dataset::records_of(int solution_id) const {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (r.solution_id == solution_id) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t0 < b.t0; });
  return out;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"game",
           {{"horizon_T", game.horizon_T},
            {"alpha", game.alpha},
            {"v_bar", game.v_bar},
            {"road_R", game.road_R},
            {"car_L", game.car_L},
            {"car_W", game.car_W},
            {"penalty_b", game.penalty_b},
            {"penalty_gamma", game.penalty_gamma},
            {"penalty_theta", game.penalty_theta},
            {"u_min", game.u_min},
            {"u_max", game.u_max}}},
          {"solver",
           {{"initial_nodes", solver.initial_nodes},
            {"max_nodes", solver.max_nodes},
            {"max_newton_iterations", solver.max_newton_iterations},
            {"max_step_halvings", solver.max_step_halvings},
            {"defect_tol", solver.defect_tol},
            {"newton_tol", solver.newton_tol},
            {"refine_tol", solver.refine_tol},
            {"max_refinements", solver.max_refinements},
            {"penalty_ramp", solver.penalty_ramp},
            {"continuation_ramp", solver.continuation_ramp}}},
          {"fit", {{"q_tol_rel", fit.q_tol_rel}, {"fit_step", fit_step}}}};
}

CostateParams fit_solution_params(const BvpSolution& sol, Player i, const PipelineConfig& pc,
                                  double* rmse, double* max_dev) {
  const double t0 = sol.t0();
  const double T = sol.tf();
  const int n = std::max(3, static_cast<int>(std::lround((T - t0) / pc.fit_step)) + 1);
  std::vector<double> grid(n);
  std::vector<double> lam1(n);
  const int col = i == Player::kOne ? 4 : 6;
  for (int k = 0; k < n; ++k) {
    grid[k] = k + 1 == n ? T : t0 + (T - t0) * k / (n - 1);
    lam1[k] = sol.interpolate(grid[k])[col];
  }
  const double lamT2 = sol.nodes.back()[col + 1];
  CostateParams p = fit_params(grid, lam1, lamT2, pc.game, pc.fit);
  if (rmse) *rmse = reconstruction_rmse(p, grid, lam1, pc.game);
  if (max_dev) {
    double m = 0.0;
    for (double v : lam1) m = std::max(m, std::abs(v - pc.game.alpha));
    *max_dev = m;
  }
  return p;
}

LabeledSolution label_point(const Point4& x0, int solution_id, const PipelineConfig& pc) {
  LabeledSolution ls;
  ls.solution_id = solution_id;
  ls.x0 = x0;
  ls.solution = solve_best({{x0[0], x0[1]}, {x0[2], x0[3]}, 0.0}, pc.game, pc.solver);
  ls.costate1 = fit_solution_params(ls.solution, Player::kOne, pc, &ls.fit_rmse1);
  ls.costate2 = fit_solution_params(ls.solution, Player::kTwo, pc, &ls.fit_rmse2);
  return ls;
}

std::array<double, 2> value_label(const BvpSolution& sol, double t0, const GameConfig& cfg) {
  return values_from(sol, t0, cfg);
}

std::vector<SampleRecord> records_from_solution(const LabeledSolution& ls,
                                                const std::vector<double>& time_grid,
                                                const PipelineConfig& pc) {
  std::vector<SampleRecord> out;
  out.reserve(time_grid.size());
  for (double t0 : time_grid) {
    SampleRecord r;
    r.t0 = t0;
    if (t0 == ls.solution.t0()) {
      r.x0 = ls.x0;
    } else {
      const PmpVector y = ls.solution.interpolate(t0);
      r.x0 = {y[0], y[1], y[2], y[3]};
    }
    r.costate1 = clip_to(ls.costate1, t0, pc.game);
    r.costate2 = clip_to(ls.costate2, t0, pc.game);
    r.values = value_label(ls.solution, t0, pc.game);
    r.interaction = classify_interaction(r.costate1, r.costate2);
    r.solution_id = ls.solution_id;
    out.push_back(r);
  }
  return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Dataset generate_dataset(const std::vector<Point4>& points, const std::vector<double>& time_grid,
                         const PipelineConfig& pc, int first_solution_id,
                         std::vector<LabeledSolution>* solutions) {
  const int n = static_cast<int>(points.size());
  std::vector<std::optional<LabeledSolution>> solved(n);
  std::vector<std::string> errors(n);
  parallel_for(n, pc.threads, [&](int k) {
    try {
      solved[k] = label_point(points[k], first_solution_id + k, pc);
    } catch (const AllGuessesFailed& e) {
      errors[k] = e.what();
    }
  });

  Dataset ds;
  for (int k = 0; k < n; ++k) {
    if (!solved[k]) {
      ds.skipped.push_back({k, points[k], errors[k]});
      continue;
    }
    const LabeledSolution& ls = *solved[k];
    for (const auto& [p, rmse] : {std::pair{ls.costate1, ls.fit_rmse1}, std::pair{ls.costate2, ls.fit_rmse2}}) {
      const int col = &p == &ls.costate1 ? 4 : 6;
      double max_dev = 0.0;
      for (const auto& y : ls.solution.nodes) max_dev = std::max(max_dev, std::abs(y[col] - pc.game.alpha));
      if (p.has_window() && rmse > pc.violation_ratio * max_dev) ++ds.model_family_violations;
    }
    auto recs = records_from_solution(ls, time_grid, pc);
    ds.records.insert(ds.records.end(), recs.begin(), recs.end());
    if (solutions) solutions->push_back(ls);
  }
  ds.provenance = {{"schema_version", kDatasetSchemaVersion},
                   {"pipeline", pc.to_json()},
                   {"config_hash", config_hash(pc.to_json().dump())},
                   {"points", n},
                   {"skipped", ds.skipped.size()},
                   {"model_family_violations", ds.model_family_violations}};
  return ds;
}

std::string dataset_csv_header() {
  return "d1,v1,d2,v2,t0,lamT2_1,tin_1,tout_1,q_1,lamT2_2,tin_2,tout_2,q_2,V1,V2,interaction,solution_id";
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw SchemaMismatch("bad number '" + s + "' in " + where);
  return v;
}

}  // namespace

void serialize(const Dataset& ds, const std::string& csv_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << dataset_csv_header() << '\n';
  for (const auto& r : ds.records) {
    const double row[] = {r.x0[0],          r.x0[1],          r.x0[2],         r.x0[3],
                          r.t0,             r.costate1.lamT2, r.costate1.t_in, r.costate1.t_out,
                          r.costate1.q,     r.costate2.lamT2, r.costate2.t_in, r.costate2.t_out,
                          r.costate2.q,     r.values[0],      r.values[1]};
    for (double v : row) csv << fmt_double(v) << ',';
    csv << to_string(r.interaction) << ',' << r.solution_id << '\n';
  }
  if (!csv) throw IoError("write failed for " + csv_path);

  nlohmann::json side = ds.provenance;
  side["schema_version"] = kDatasetSchemaVersion;
  side["records"] = ds.records.size();
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : ds.skipped) {
    skipped.push_back({{"point_index", s.point_index}, {"x0", s.x0}, {"reason", s.reason}});
  }
  side["skip_log"] = skipped;
  side["model_family_violations"] = ds.model_family_violations;
  std::ofstream js(csv_path + ".json", std::ios::binary);
  if (!js) throw IoError("cannot write " + csv_path + ".json");
  js << side.dump(2) << '\n';
}

Dataset deserialize(const std::string& csv_path) {
  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot read " + csv_path);
  Dataset ds;
  std::ifstream js(csv_path + ".json", std::ios::binary);
  if (js) {
    ds.provenance = nlohmann::json::parse(js);
    if (ds.provenance.value("schema_version", kDatasetSchemaVersion) != kDatasetSchemaVersion) {
      throw SchemaMismatch("dataset schema version " + ds.provenance["schema_version"].dump() +
                           " is not " + std::to_string(kDatasetSchemaVersion));
    }
    for (const auto& s : ds.provenance.value("skip_log", nlohmann::json::array())) {
      ds.skipped.push_back({s.at("point_index").get<int>(), s.at("x0").get<Point4>(),
                            s.at("reason").get<std::string>()});
    }
    ds.model_family_violations = ds.provenance.value("model_family_violations", 0);
    ds.provenance.erase("skip_log");
    ds.provenance.erase("records");
  }

  std::string line;
  if (!std::getline(csv, line) || line != dataset_csv_header()) {
    throw SchemaMismatch("unexpected dataset header in " + csv_path);
  }
  int line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 17) {
      throw SchemaMismatch(csv_path + ":" + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " columns");
    }
    const std::string where = csv_path + ":" + std::to_string(line_no);
    double v[15];
    for (int k = 0; k < 15; ++k) v[k] = parse_double(cells[k], where);
    SampleRecord r;
    r.x0 = {v[0], v[1], v[2], v[3]};
    r.t0 = v[4];
    r.costate1 = {v[5], v[6], v[7], v[8]};
    r.costate2 = {v[9], v[10], v[11], v[12]};
    r.values = {v[13], v[14]};
    r.interaction = interaction_from_string(cells[15]);
    r.solution_id = std::stoi(cells[16]);
    ds.records.push_back(r);
  }
  return ds;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

}  // namespace costate
