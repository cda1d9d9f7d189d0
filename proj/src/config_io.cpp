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

#include "costate/config_io.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace costate {

ExperimentPlan ExperimentPlan::full() {
  ExperimentPlan p;
  p.sizes = {50, 100, 150, 200, 250, 300};
  p.repeats = 20;
  return p;
}

void ExperimentPlan::validate(int train_pool_size) const {
  if (sizes.empty()) throw std::invalid_argument("plan needs at least one size");
  for (int s : sizes) {
    if (s < 1 || s > train_pool_size) {
      throw std::invalid_argument("plan size " + std::to_string(s) + " outside [1, train pool size]");
    }
  }
  if (repeats < 2) throw std::invalid_argument("plan needs at least 2 repeats");
  if (!(active_fraction >= 0.0 && active_fraction < 1.0)) {
    throw std::invalid_argument("active_fraction must lie in [0, 1)");
  }
  for (const auto& v : variants) {
    if (v != "value" && v != "costate_static" && v != "costate_active") {
      throw std::invalid_argument("unknown variant '" + v + "'");
    }
  }
}

RunConfig RunConfig::full() {
  RunConfig rc;
  rc.sampler = SamplerConfig::full();
  rc.plan = ExperimentPlan::full();
  return rc;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig pc;
  pc.game = game;
  pc.solver = solver;
  pc.fit_step = fit_step;
  pc.threads = threads;
  return pc;
}

void RunConfig::validate() const {
  game.validate();
  sampler.validate();
  train.validate();
  plan.validate(sampler.n_train);
  active.validate(sampler.n_acquisition);
  if (retrain_max_epochs < 1) throw std::invalid_argument("retrain_max_epochs must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

namespace {

// Reads (in != nullptr) or writes (out != nullptr) one JSON object section.
class Section {
 public:
  Section(const nlohmann::json* in, nlohmann::json* out, std::string name)
      : in_(in), out_(out), name_(std::move(name)) {
    if (in_ && !in_->is_object()) throw std::invalid_argument("config section '" + name_ + "' must be an object");
  }

  template <typename V>
  Section& bind(const std::string& key, V& value) {
    keys_.push_back(key);
    if (out_) (*out_)[key] = value;
    if (in_ && in_->contains(key)) in_->at(key).get_to(value);
    return *this;
  }

  void finish() const {
    if (!in_) return;
    for (const auto& [k, v] : in_->items()) {
      if (std::find(keys_.begin(), keys_.end(), k) == keys_.end()) {
        throw std::invalid_argument("unknown config key '" + name_ + "." + k + "'");
      }
    }
  }

 private:
  const nlohmann::json* in_;
  nlohmann::json* out_;
  std::string name_;
  std::vector<std::string> keys_;
};

void visit(RunConfig& rc, const nlohmann::json* in, nlohmann::json* out) {
  const std::vector<std::string> sections{"game", "solver", "sampler", "train", "active", "plan"};
  if (in) {
    if (!in->is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& [k, v] : in->items()) {
      const bool known = std::find(sections.begin(), sections.end(), k) != sections.end() ||
                         k == "threads" || k == "retrain_max_epochs" || k == "range_margin" ||
                         k == "fit_step" || k == "max_skip_rate";
      if (!known) throw std::invalid_argument("unknown config key '" + k + "'");
    }
  }
  auto sub_in = [&](const std::string& name) -> const nlohmann::json* {
    return in && in->contains(name) ? &in->at(name) : nullptr;
  };
  auto sub_out = [&](const std::string& name) -> nlohmann::json* {
    if (!out) return nullptr;
    (*out)[name] = nlohmann::json::object();
    return &(*out)[name];
  };

  GameConfig& g = rc.game;
  Section(sub_in("game"), sub_out("game"), "game")
      .bind("horizon_T", g.horizon_T)
      .bind("alpha", g.alpha)
      .bind("v_bar", g.v_bar)
      .bind("road_R", g.road_R)
      .bind("car_L", g.car_L)
      .bind("car_W", g.car_W)
      .bind("penalty_b", g.penalty_b)
      .bind("penalty_gamma", g.penalty_gamma)
      .bind("penalty_theta", g.penalty_theta)
      .bind("u_min", g.u_min)
      .bind("u_max", g.u_max)
      .finish();

  SolverConfig& s = rc.solver;
  Section(sub_in("solver"), sub_out("solver"), "solver")
      .bind("initial_nodes", s.initial_nodes)
      .bind("max_nodes", s.max_nodes)
      .bind("max_newton_iterations", s.max_newton_iterations)
      .bind("max_step_halvings", s.max_step_halvings)
      .bind("defect_tol", s.defect_tol)
      .bind("newton_tol", s.newton_tol)
      .bind("refine_tol", s.refine_tol)
      .bind("max_refinements", s.max_refinements)
      .bind("penalty_ramp", s.penalty_ramp)
      .bind("continuation_ramp", s.continuation_ramp)
      .finish();

  SamplerConfig& sm = rc.sampler;
  Section(sub_in("sampler"), sub_out("sampler"), "sampler")
      .bind("box_lo", sm.box.lo)
      .bind("box_hi", sm.box.hi)
      .bind("n_train", sm.n_train)
      .bind("n_acquisition", sm.n_acquisition)
      .bind("n_test", sm.n_test)
      .bind("n_validation", sm.n_validation)
      .bind("t0_max", sm.t0_max)
      .bind("t0_steps", sm.t0_steps)
      .bind("seed", sm.seed)
      .finish();

  TrainConfig& t = rc.train;
  Section(sub_in("train"), sub_out("train"), "train")
      .bind("learning_rate", t.learning_rate)
      .bind("patience_epochs", t.patience_epochs)
      .bind("max_epochs", t.max_epochs)
      .bind("cumulative_patience", t.cumulative_patience)
      .finish();

  ActiveConfig& a = rc.active;
  Section(sub_in("active"), sub_out("active"), "active")
      .bind("candidates_per_iter", a.candidates_per_iter)
      .bind("picks_per_iter", a.picks_per_iter)
      .bind("rollout_step", a.rollout_step)
      .bind("inverse_substeps", a.inverse_substeps)
      .bind("blowup_cap", a.blowup_cap)
      .bind("warm_start", a.warm_start)
      .finish();

  ExperimentPlan& p = rc.plan;
  Section(sub_in("plan"), sub_out("plan"), "plan")
      .bind("sizes", p.sizes)
      .bind("repeats", p.repeats)
      .bind("base_seed", p.base_seed)
      .bind("variants", p.variants)
      .bind("active_fraction", p.active_fraction)
      .finish();

  Section top(in, out, "");
  top.bind("threads", rc.threads)
      .bind("retrain_max_epochs", rc.retrain_max_epochs)
      .bind("range_margin", rc.range_margin)
      .bind("fit_step", rc.fit_step)
      .bind("max_skip_rate", rc.max_skip_rate);
}

}  // namespace

nlohmann::json to_json(const RunConfig& rc) {
  RunConfig copy = rc;
  nlohmann::json out = nlohmann::json::object();
  visit(copy, nullptr, &out);
  return out;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base) {
  visit(base, &j, nullptr);
  return base;
}

RunConfig load_run_config(const std::string& path, bool full) {
  RunConfig base = full ? RunConfig::full() : RunConfig{};
  if (path.empty()) return base;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return run_config_from_json(j, base);
}

void save_run_config(const RunConfig& rc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(rc).dump(2) << '\n';
}

}  // namespace costate
