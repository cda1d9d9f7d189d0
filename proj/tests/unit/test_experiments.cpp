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

#include "costate/experiments.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace costate {
namespace {

namespace fs = std::filesystem;

// Welch reference on top of boost's t distribution.
double boost_welch(const std::vector<double>& a, const std::vector<double>& b) {
  const double va = sample_std(a) * sample_std(a) / a.size();
  const double vb = sample_std(b) * sample_std(b) / b.size();
  const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / (a.size() - 1.0) + vb * vb / (b.size() - 1.0));
  return boost::math::cdf(boost::math::students_t(df), t);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(IncompleteBeta, MatchesBoost) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ab(0.2, 30.0);
  std::uniform_real_distribution<double> x(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const double a = ab(rng);
    const double b = ab(rng);
    const double xx = x(rng);
    EXPECT_NEAR(regularized_incomplete_beta(a, b, xx), boost::math::ibeta(a, b, xx), 1e-10);
  }
  EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
}

TEST(StudentT, MatchesBoost) {
  for (double df : {1.0, 2.5, 4.0, 9.3, 40.0}) {
    for (double t : {-6.0, -2.0, -0.3, 0.0, 0.7, 3.0}) {
      EXPECT_NEAR(student_t_cdf(t, df), boost::math::cdf(boost::math::students_t(df), t), 1e-10);
    }
  }
  EXPECT_EQ(student_t_cdf(0.0, 3.0), 0.5);
}

TEST(Welch, ReferenceExample) {
  const double p = welch_one_sided({1, 2, 3}, {4, 5, 6});
  EXPECT_NEAR(p, boost_welch({1, 2, 3}, {4, 5, 6}), 1e-10);
  EXPECT_NEAR(p, 0.0116, 1e-3);
}

TEST(Welch, EqualSamplesGiveHalf) {
  EXPECT_EQ(welch_one_sided({1, 2, 3}, {1, 2, 3}), 0.5);
  EXPECT_EQ(welch_one_sided({4, 4, 4}, {4, 4, 4}), 0.5);
  EXPECT_EQ(welch_one_sided({1, 1}, {2, 2}), 0.0);
  EXPECT_EQ(welch_one_sided({3, 3}, {2, 2}), 1.0);
}

TEST(Welch, SeparatedGroupsAreSignificant) {
  const std::vector<double> a{0.0, 1e-3, -1e-3, 2e-3, 0.0};
  const std::vector<double> b{10.0, 10.001, 9.999, 10.0, 10.002};
  const double p = welch_one_sided(a, b);
  EXPECT_LT(p, 0.01);
  EXPECT_NEAR(p, boost_welch(a, b), 1e-12);
}

TEST(Welch, SwapGivesComplement) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a(5), b(7);
    for (double& v : a) v = n(rng);
    for (double& v : b) v = n(rng) + 0.5;
    const double p = welch_one_sided(a, b);
    EXPECT_NEAR(p + welch_one_sided(b, a), 1.0, 1e-12);
    EXPECT_NEAR(p, boost_welch(a, b), 1e-9);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Welch, NeedsTwoRepeats) {
  EXPECT_THROW(welch_one_sided({1.0}, {1.0, 2.0}), InsufficientRepeats);
}

TEST(Plan, SeedsSizesAndBudget) {
  RunConfig rc;
  EXPECT_EQ(rc.plan.seed(3), rc.plan.base_seed + 3);
  EXPECT_EQ(active_budget(250, rc), 120);
  EXPECT_EQ(active_budget(50, rc), 20);
  EXPECT_EQ(run_dir_for("out", "value", 50, 7), "out/runs/value/size_50/seed_7");
  Dataset pool;
  for (int id = 0; id < 10; ++id) {
    SampleRecord r;
    r.solution_id = id * 3;
    pool.records.push_back(r);
  }
  const auto a = draw_subset(pool, 4, 1);
  EXPECT_EQ(a, draw_subset(pool, 4, 1));
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 4u);
  EXPECT_EQ(draw_subset(pool, 10, 5).size(), 10u);
  EXPECT_THROW(draw_subset(pool, 11, 1), std::invalid_argument);
}

void write_summary(const fs::path& out, const std::string& variant, int size, int seed, double coll) {
  const fs::path d = run_dir_for(out.string(), variant, size, seed);
  fs::create_directories(d);
  nlohmann::json j{{"variant", variant},
                   {"size", size},
                   {"seed", seed},
                   {"config_hash", "abc"},
                   {"code_version", kCodeVersion},
                   {"evaluation", {{"collision_percentage", coll}, {"costate_error_mean", 0.1}}}};
  std::ofstream(d / "summary.json") << j.dump();
}

TEST(Compare, ReportsTwoPValuesPerSize) {
  const fs::path out = fs::temp_directory_path() / "costate_compare_test";
  fs::remove_all(out);
  const double value[] = {20, 22, 25};
  const double st[] = {10, 12, 11};
  const double ac[] = {10, 12, 11};
  for (int size : {50, 150}) {
    for (int s = 0; s < 3; ++s) {
      write_summary(out, "value", size, s, value[s]);
      write_summary(out, "costate_static", size, s, st[s]);
      write_summary(out, "costate_active", size, s, ac[s]);
    }
  }
  const ComparisonReport rep = cmd_compare(out.string());
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& row : rep.rows) {
    EXPECT_NEAR(row.p_value_vs_static, welch_one_sided({10, 12, 11}, {20, 22, 25}), 1e-15);
    EXPECT_EQ(row.p_static_vs_active, 0.5);
  }
  EXPECT_TRUE(fs::exists(out / "comparison.csv"));
  const auto j = nlohmann::json::parse(slurp(out / "comparison.json"));
  EXPECT_EQ(j.at("config_hashes"), nlohmann::json::array({"abc"}));
  EXPECT_EQ(j.at("seeds").at("50").at("value").size(), 3u);

  write_summary(out, "value", 300, 0, 5.0);
  write_summary(out, "costate_static", 300, 0, 5.0);
  EXPECT_THROW(cmd_compare(out.string()), InsufficientRepeats);
}

RunConfig tiny_config() {
  RunConfig rc;
  rc.sampler.n_train = 4;
  rc.sampler.n_acquisition = 3;
  rc.sampler.n_test = 2;
  rc.sampler.n_validation = 2;
  rc.sampler.seed = 17;
  rc.train.max_epochs = 30;
  rc.retrain_max_epochs = 10;
  rc.active.candidates_per_iter = 2;
  rc.active.picks_per_iter = 1;
  rc.plan.sizes = {2};
  rc.plan.repeats = 2;
  return rc;
}

// One shared tiny run directory; BVP solves dominate the cost.
const fs::path& tiny_run() {
  static const fs::path out = [] {
    const fs::path p = fs::temp_directory_path() / "costate_tiny_run";
    fs::remove_all(p);
    cmd_gen_data(tiny_config(), p.string());
    return p;
  }();
  return out;
}

TEST(GenData, WritesDisjointDatasets) {
  const fs::path& out = tiny_run();
  const DataPaths paths = DataPaths::in(out.string());
  for (const auto& p : {paths.train, paths.acquisition, paths.test, paths.validation}) {
    EXPECT_TRUE(fs::exists(p));
    EXPECT_TRUE(fs::exists(p + ".json"));
  }
  EXPECT_TRUE(fs::exists(out / "config.json"));
  const Dataset train = deserialize(paths.train);
  const Dataset acq = deserialize(paths.acquisition);
  std::set<Point4> keys;
  for (const auto& r : train.records) keys.insert(r.x0);
  for (const auto& r : acq.records) EXPECT_EQ(keys.count(r.x0), 0u);
  EXPECT_EQ(train.records.size(), 4u * 31u);
  EXPECT_EQ(train.provenance.at("set"), "train");
  EXPECT_EQ(train.provenance.at("code_version"), kCodeVersion);
}

TEST(GenData, RerunIsByteIdentical) {
  const fs::path again = fs::temp_directory_path() / "costate_tiny_run_again";
  fs::remove_all(again);
  cmd_gen_data(tiny_config(), again.string());
  const DataPaths a = DataPaths::in(tiny_run().string());
  const DataPaths b = DataPaths::in(again.string());
  EXPECT_EQ(slurp(a.train), slurp(b.train));
  EXPECT_EQ(slurp(a.test), slurp(b.test));
  EXPECT_EQ(slurp(a.acquisition + ".json"), slurp(b.acquisition + ".json"));
}

TEST(Train, EachVariantWritesItsArtifacts) {
  const RunConfig rc = tiny_config();
  const std::string out = tiny_run().string();
  for (const std::string variant : {"value", "costate_static", "costate_active"}) {
    const TrainOutcome o = cmd_train(rc, variant, 2, 0, out);
    const fs::path d(o.run_dir);
    EXPECT_TRUE(fs::exists(d / "checkpoint.json"));
    EXPECT_TRUE(fs::exists(d / "curve.csv"));
    EXPECT_TRUE(fs::exists(d / "cases.csv"));
    EXPECT_EQ(fs::exists(d / "acquisition_log.csv"), variant == "costate_active");
    EXPECT_TRUE(std::isfinite(o.report.costate_error_mean));
    const auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    EXPECT_EQ(s.at("variant"), variant);
    EXPECT_EQ(s.at("code_version"), kCodeVersion);
    EXPECT_TRUE(s.contains("config_hash"));
    EXPECT_EQ(s.at("seed"), 0);
    const auto ck = nlohmann::json::parse(slurp(d / "checkpoint.json"));
    EXPECT_EQ(ck.at("variant"), variant);
    EXPECT_TRUE(ck.contains("model"));
  }
  EXPECT_THROW(cmd_train(rc, "mystery", 2, 0, out), std::invalid_argument);
}

TEST(Train, RerunIsByteIdentical) {
  const RunConfig rc = tiny_config();
  const std::string out = tiny_run().string();
  const TrainOutcome a = cmd_train(rc, "costate_active", 2, 1, out);
  const std::string first = slurp(fs::path(a.run_dir) / "checkpoint.json");
  const std::string log = slurp(fs::path(a.run_dir) / "acquisition_log.csv");
  const TrainOutcome b = cmd_train(rc, "costate_active", 2, 1, out);
  EXPECT_EQ(slurp(fs::path(b.run_dir) / "checkpoint.json"), first);
  EXPECT_EQ(slurp(fs::path(b.run_dir) / "acquisition_log.csv"), log);
}

TEST(Evaluate, CheckpointReplaysSummary) {
  const RunConfig rc = tiny_config();
  const std::string out = tiny_run().string();
  const TrainOutcome o = cmd_train(rc, "costate_static", 2, 2, out);
  const EvalReport r = cmd_evaluate(rc, (fs::path(o.run_dir) / "checkpoint.json").string(), out,
                                    (fs::path(o.run_dir) / "re_").string());
  EXPECT_EQ(r.costate_error_mean, o.report.costate_error_mean);
  EXPECT_EQ(r.collisions, o.report.collisions);
  EXPECT_TRUE(fs::exists(fs::path(o.run_dir) / "re_summary.json"));
}

TEST(Simulate, WritesTrajectory) {
  const RunConfig rc = tiny_config();
  const fs::path csv = fs::temp_directory_path() / "costate_sim_traj.csv";
  const SimResult r = cmd_simulate(rc, "analytic_b0", "", {{16.0, 20.0}, {18.0, 23.0}, 0.0}, csv.string());
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,d1,v1,d2,v2,u1,u2");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, static_cast<int>(r.trajectory.size()));
  EXPECT_THROW(cmd_simulate(rc, "costate_net", "", {{16.0, 20.0}, {18.0, 23.0}, 0.0}, csv.string()),
               std::exception);
}

}  // namespace
}  // namespace costate
