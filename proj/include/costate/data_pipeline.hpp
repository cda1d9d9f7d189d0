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

#pragma once

#include "costate/bvp_solver.hpp"
#include "costate/costate_repr.hpp"
#include "costate/game_model.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace costate {

// Initial state (d1, v1, d2, v2).
using Point4 = std::array<double, 4>;

struct SampleBox {
  Point4 lo{15.0, 18.0, 15.0, 18.0};
  Point4 hi{20.0, 25.0, 20.0, 25.0};

  bool contains(const Point4& p) const;
};

struct SamplerConfig {
  SampleBox box;
  int n_train = 400;
  int n_acquisition = 200;
  int n_test = 150;
  int n_validation = 100;
  double t0_max = 3.0;
  int t0_steps = 30;  // 0.1 s spacing
  std::uint64_t seed = 0;

  // 1573 / 1000 / 575 / 400.
  static SamplerConfig full();
  std::vector<double> time_grid() const;
  void validate() const;
};

// Latin hypercube: each dimension is cut into n equal strata and every
// stratum receives exactly one point, jittered uniformly inside it.
std::vector<Point4> lhs_sample(int n, const SampleBox& box, std::uint64_t seed);

struct SampleRecord {
  Point4 x0{};
  double t0 = 0.0;
  CostateParams costate1;
  CostateParams costate2;
  std::array<double, 2> values{0.0, 0.0};
  InteractionType interaction = InteractionType::kNoCollision;
  int solution_id = 0;

  JointState joint() const { return {{x0[0], x0[1]}, {x0[2], x0[3]}, t0}; }
  bool operator==(const SampleRecord&) const = default;
};

struct SkipEntry {
  int point_index = 0;
  Point4 x0{};
  std::string reason;
};

struct Dataset {
  std::vector<SampleRecord> records;
  nlohmann::json provenance = nlohmann::json::object();
  std::vector<SkipEntry> skipped;
  int model_family_violations = 0;

  // Distinct solution ids in record order.
  std::vector<int> solution_ids() const;
  // Records of one source solution, ordered by t0.
  std::vector<SampleRecord> records_of(int solution_id) const;
};

struct PipelineConfig {
  GameConfig game;
  SolverConfig solver;
  FitOptions fit;
  // Uniform resampling step of lam[1] used for the step fit.
  double fit_step = 0.01;
  // Flags a fit whose RMSE exceeds this fraction of max|lam[1] - alpha|.
  double violation_ratio = 0.15;
  int threads = 1;

  nlohmann::json to_json() const;
};

// Solution of one sampled point together with the t = t0 fit.
struct LabeledSolution {
  int solution_id = 0;
  Point4 x0{};
  BvpSolution solution;
  CostateParams costate1;
  CostateParams costate2;
  double fit_rmse1 = 0.0;
  double fit_rmse2 = 0.0;
};

// Resamples lam[1] of one player and fits the step model.
CostateParams fit_solution_params(const BvpSolution& sol, Player i, const PipelineConfig& pc,
                                  double* rmse = nullptr, double* max_dev = nullptr);

LabeledSolution label_point(const Point4& x0, int solution_id, const PipelineConfig& pc);

// One record per t0 in time_grid, taken along the equilibrium trajectory.
std::vector<SampleRecord> records_from_solution(const LabeledSolution& ls,
                                                const std::vector<double>& time_grid,
                                                const PipelineConfig& pc);

// Solves every point (in parallel) and assembles records ordered by
// (point index, t0). Points whose solves all fail go to the skip log.
Dataset generate_dataset(const std::vector<Point4>& points, const std::vector<double>& time_grid,
                         const PipelineConfig& pc, int first_solution_id = 0,
                         std::vector<LabeledSolution>* solutions = nullptr);

std::array<double, 2> value_label(const BvpSolution& sol, double t0, const GameConfig& cfg);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDatasetSchemaVersion = 1;
std::string dataset_csv_header();

// CSV plus "<path>.json" provenance sidecar.
void serialize(const Dataset& ds, const std::string& csv_path);
Dataset deserialize(const std::string& csv_path);

// Stable 64-bit FNV-1a of a string, rendered as hex.
std::string config_hash(const std::string& text);

// Runs fn(k) for k in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace costate
