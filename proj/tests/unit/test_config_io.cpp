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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace costate {
namespace {

namespace fs = std::filesystem;

TEST(RunConfig, DefaultsValidate) {
  const RunConfig rc;
  EXPECT_NO_THROW(rc.validate());
  EXPECT_EQ(rc.plan.sizes, (std::vector<int>{50, 150, 250}));
  EXPECT_EQ(rc.plan.repeats, 5);
  EXPECT_EQ(rc.sampler.n_train, 400);
  const RunConfig full = RunConfig::full();
  EXPECT_NO_THROW(full.validate());
  EXPECT_EQ(full.plan.sizes, (std::vector<int>{50, 100, 150, 200, 250, 300}));
  EXPECT_EQ(full.plan.repeats, 20);
  EXPECT_EQ(full.sampler.n_train, 1573);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig rc;
  rc.game.penalty_b = 0.0;
  rc.solver.continuation_ramp = {0.5, 1.0};
  rc.sampler.seed = 99;
  rc.sampler.box.hi[1] = 24.0;
  rc.train.learning_rate = 0.02;
  rc.active.warm_start = false;
  rc.plan.variants = {"value", "costate_static"};
  rc.threads = 3;
  const RunConfig back = run_config_from_json(nlohmann::json::parse(to_json(rc).dump()));
  EXPECT_EQ(to_json(back), to_json(rc));
  EXPECT_EQ(back.game.penalty_b, 0.0);
  EXPECT_EQ(back.solver.continuation_ramp, rc.solver.continuation_ramp);
  EXPECT_EQ(back.sampler.box.hi[1], 24.0);
  EXPECT_FALSE(back.active.warm_start);
}

TEST(RunConfig, PartialJsonKeepsDefaults) {
  const auto j = nlohmann::json::parse(R"({"sampler": {"n_test": 12}, "threads": 2})");
  const RunConfig rc = run_config_from_json(j);
  EXPECT_EQ(rc.sampler.n_test, 12);
  EXPECT_EQ(rc.sampler.n_train, 400);
  EXPECT_EQ(rc.threads, 2);
  EXPECT_EQ(rc.train.learning_rate, 0.01);
  // Partial files on top of the full preset.
  const RunConfig f = run_config_from_json(j, RunConfig::full());
  EXPECT_EQ(f.sampler.n_train, 1573);
  EXPECT_EQ(f.sampler.n_test, 12);
}

TEST(RunConfig, UnknownKeysRejected) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"gmae": {}})")), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"game": {"alpah": 1}})")), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"game": 3})")), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"train": {"learning_rate": "fast"}})")),
               nlohmann::json::exception);
}

TEST(RunConfig, ValidationCatchesBadPlans) {
  RunConfig rc;
  rc.plan.sizes = {500};
  EXPECT_THROW(rc.validate(), std::invalid_argument);
  rc.plan.sizes = {50};
  rc.plan.repeats = 1;
  EXPECT_THROW(rc.validate(), std::invalid_argument);
  rc.plan.repeats = 2;
  rc.plan.variants = {"value", "lookup_table"};
  EXPECT_THROW(rc.validate(), std::invalid_argument);
  rc.plan.variants = {"value"};
  rc.threads = 0;
  EXPECT_THROW(rc.validate(), std::invalid_argument);
}

TEST(RunConfig, FileRoundTrip) {
  const fs::path p = fs::temp_directory_path() / "costate_config_test.json";
  RunConfig rc;
  rc.plan.base_seed = 7;
  save_run_config(rc, p.string());
  EXPECT_EQ(to_json(load_run_config(p.string(), false)), to_json(rc));
  EXPECT_EQ(to_json(load_run_config("", true)), to_json(RunConfig::full()));
  EXPECT_THROW(load_run_config((fs::temp_directory_path() / "no_such_config.json").string(), false), IoError);
  std::ofstream(p) << "{not json";
  EXPECT_THROW(load_run_config(p.string(), false), std::invalid_argument);
}

TEST(RunConfig, PipelineCarriesSettings) {
  RunConfig rc;
  rc.game.penalty_theta = 2.0;
  rc.solver.max_nodes = 301;
  rc.fit_step = 0.02;
  rc.threads = 4;
  const PipelineConfig pc = rc.pipeline();
  EXPECT_EQ(pc.game.penalty_theta, 2.0);
  EXPECT_EQ(pc.solver.max_nodes, 301);
  EXPECT_EQ(pc.fit_step, 0.02);
  EXPECT_EQ(pc.threads, 4);
}

}  // namespace
}  // namespace costate
