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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace fs = std::filesystem;

namespace costate {

// ---------------------------------------------------------------------------
// Statistics

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x below the mean; use symmetry above it.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t < 0.0 ? tail : 1.0 - tail;
}

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / x.size();
}

double sample_std(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / (x.size() - 1));
}

double welch_one_sided(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw InsufficientRepeats("Welch test needs at least 2 samples per group");
  const double na = a.size();
  const double nb = b.size();
  const double ma = mean(a);
  const double mb = mean(b);
  const double sa = sample_std(a);
  const double sb = sample_std(b);
  const double va = sa * sa / na;
  const double vb = sb * sb / nb;
  if (va + vb == 0.0) {
    if (ma == mb) return 0.5;
    return ma < mb ? 0.0 : 1.0;
  }
  const double t = (ma - mb) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return student_t_cdf(t, df);
}

// ---------------------------------------------------------------------------
// Data generation

DataPaths DataPaths::in(const std::string& out_dir) {
  const fs::path d = fs::path(out_dir) / "data";
  return {(d / "train.csv").string(), (d / "acquisition.csv").string(), (d / "test.csv").string(),
          (d / "validation.csv").string()};
}

namespace {

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return nlohmann::json::parse(in);
}

std::string hash_of(const RunConfig& rc) { return config_hash(to_json(rc).dump()); }

}  // namespace

GenDataSummary cmd_gen_data(const RunConfig& rc, const std::string& out_dir) {
  rc.validate();
  const DataPaths paths = DataPaths::in(out_dir);
  fs::create_directories(fs::path(paths.train).parent_path());
  save_run_config(rc, (fs::path(out_dir) / "config.json").string());

  const PipelineConfig pc = rc.pipeline();
  const auto grid = rc.sampler.time_grid();
  const CollisionBox box = CollisionBox::from_game(rc.game);
  struct Set {
    std::string name;
    int n;
    std::string path;
  };
  const std::vector<Set> sets{{"train", rc.sampler.n_train, paths.train},
                              {"acquisition", rc.sampler.n_acquisition, paths.acquisition},
                              {"test", rc.sampler.n_test, paths.test},
                              {"validation", rc.sampler.n_validation, paths.validation}};

  GenDataSummary summary;
  std::vector<std::vector<Point4>> drawn;
  int total_points = 0;
  int total_skipped = 0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const std::uint64_t seed = split_seed(rc.sampler.seed, s);
    drawn.push_back(lhs_sample(sets[s].n, rc.sampler.box, seed));
  }
  {
    // Independent draws from a continuous box collide with probability 0.
    const std::set<Point4> train_keys(drawn[0].begin(), drawn[0].end());
    for (const auto& p : drawn[1]) {
      if (train_keys.count(p)) throw std::runtime_error("train and acquisition sets share an initial state");
    }
  }

  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::vector<LabeledSolution> sols;
    Dataset ds = generate_dataset(drawn[s], grid, pc, static_cast<int>(s) * 1000000, &sols);
    if (sets[s].name == "test") {
      std::set<int> colliding;
      for (const auto& ls : sols) {
        if (trajectory_collides(ls.solution, box)) colliding.insert(ls.solution_id);
      }
      std::erase_if(ds.records, [&](const SampleRecord& r) { return colliding.count(r.solution_id) > 0; });
      summary.test_collision_filtered = static_cast<int>(colliding.size());
      ds.provenance["collision_filtered"] = colliding.size();
    }
    ds.provenance["set"] = sets[s].name;
    ds.provenance["sampler_seed"] = rc.sampler.seed;
    ds.provenance["lhs_seed"] = split_seed(rc.sampler.seed, s);
    ds.provenance["code_version"] = kCodeVersion;
    serialize(ds, sets[s].path);
    summary.records[sets[s].name] = static_cast<int>(ds.records.size());
    summary.skipped[sets[s].name] = static_cast<int>(ds.skipped.size());
    total_points += sets[s].n;
    total_skipped += static_cast<int>(ds.skipped.size());
  }
  if (total_skipped > rc.max_skip_rate * total_points) {
    throw std::runtime_error("solver failed on " + std::to_string(total_skipped) + " of " +
                             std::to_string(total_points) + " initial states");
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Training

std::string run_dir_for(const std::string& out_dir, const std::string& variant, int size,
                        std::uint64_t seed) {
  return (fs::path(out_dir) / "runs" / variant / ("size_" + std::to_string(size)) /
          ("seed_" + std::to_string(seed)))
      .string();
}

std::vector<int> draw_subset(const Dataset& pool, int size, std::uint64_t seed) {
  std::vector<int> ids = pool.solution_ids();
  if (size > static_cast<int>(ids.size())) {
    throw std::invalid_argument("requested " + std::to_string(size) + " training states but the pool has " +
                                std::to_string(ids.size()));
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < size; ++k) {
    std::uniform_int_distribution<int> pick(k, static_cast<int>(ids.size()) - 1);
    std::swap(ids[k], ids[pick(rng)]);
  }
  ids.resize(size);
  return ids;
}

int active_budget(int size, const RunConfig& rc) {
  const int picks = rc.active.picks_per_iter;
  return static_cast<int>(std::floor(size * rc.plan.active_fraction / picks)) * picks;
}

namespace {

std::vector<SampleRecord> records_for(const Dataset& ds, const std::vector<int>& ids) {
  const std::set<int> keep(ids.begin(), ids.end());
  std::vector<SampleRecord> out;
  for (const auto& r : ds.records) {
    if (keep.count(r.solution_id)) out.push_back(r);
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> value_training_data(const std::vector<SampleRecord>& records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd x(5, n);
  Eigen::MatrixXd y(2, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const SampleRecord& r = records[static_cast<std::size_t>(k)];
    x.col(k) = network_input(r.joint());
    y(0, k) = r.values[0];
    y(1, k) = r.values[1];
  }
  return {x, y};
}

void write_curve(const std::vector<std::pair<std::string, TrainHistory>>& phases, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "phase,epoch,train_loss,validation_loss\n";
  char buf[96];
  for (const auto& [name, h] : phases) {
    for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
      std::snprintf(buf, sizeof(buf), ",%zu,%.17g,%.17g\n", e, h.train_loss[e], h.validation_loss[e]);
      out << name << buf;
    }
  }
}

nlohmann::json history_json(const TrainHistory& h) {
  return {{"epochs", h.train_loss.size()},
          {"best_epoch", h.best_epoch},
          {"best_validation", h.best_validation},
          {"stopped_epoch", h.stopped_epoch}};
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& rc, const std::string& variant, int size, std::uint64_t seed,
                       const std::string& out_dir) {
  rc.validate();
  if (variant != "value" && variant != "costate_static" && variant != "costate_active") {
    throw std::invalid_argument("unknown variant '" + variant + "'");
  }
  const DataPaths paths = DataPaths::in(out_dir);
  const Dataset train_pool = deserialize(paths.train);
  const Dataset test = deserialize(paths.test);
  const Dataset validation = deserialize(paths.validation);

  TrainOutcome outcome;
  outcome.run_dir = run_dir_for(out_dir, variant, size, seed);
  fs::create_directories(outcome.run_dir);
  const fs::path dir(outcome.run_dir);

  const std::vector<int> ids = draw_subset(train_pool, size, seed);
  TrainConfig tc = rc.train;
  tc.seed = seed;
  SimConfig sim = SimConfig::from_game(rc.game, ControllerKind::kCostateNet);
  sim.threads = rc.threads;

  nlohmann::json checkpoint{{"variant", variant}, {"size", size}, {"seed", seed}};
  std::vector<std::pair<std::string, TrainHistory>> phases;
  nlohmann::json extra = nlohmann::json::object();

  if (variant == "value") {
    const auto train = records_for(train_pool, ids);
    auto [tx, ty] = value_training_data(train);
    auto [vx, vy] = value_training_data(validation.records);
    ValueNet net(GateConfig::from_game(rc.game), seed);
    net.normalizer() = InputNormalizer::fit(tx);
    net.range() = OutputRange::fit(ty, rc.range_margin);
    outcome.history = train_full_batch(net, tx, net.range().to_unit(ty), vx, net.range().to_unit(vy), tc);
    phases.emplace_back("initial", outcome.history);
    sim.kinds = {ControllerKind::kValueNetGrad, ControllerKind::kValueNetGrad};
    Models models;
    models.value = &net;
    outcome.report = evaluate(models, test, sim);
    checkpoint["model"] = net.to_json();
    outcome.train_solutions = size;
  } else {
    const int budget = variant == "costate_active" ? active_budget(size, rc) : 0;
    const std::vector<int> initial(ids.begin(), ids.end() - budget);
    CostateNet net(seed, rc.game.horizon_T);
    outcome.history = train_costate_net(net, records_for(train_pool, initial), validation.records, tc, true,
                                        rc.range_margin);
    phases.emplace_back("initial", outcome.history);
    outcome.train_solutions = static_cast<int>(initial.size());

    if (variant == "costate_active") {
      const Dataset acquisition = deserialize(paths.acquisition);
      const std::vector<int> pool_ids = acquisition.solution_ids();
      std::vector<Point4> pool;
      for (int id : pool_ids) pool.push_back(acquisition.records_of(id).front().x0);
      // Labels were solved once during gen-data; reuse them instead of
      // re-running the (deterministic) solver.
      const Labeler labeler = [&](int k) { return acquisition.records_of(pool_ids[k]); };
      ActiveConfig ac = rc.active;
      ac.budget = std::min<int>(budget, static_cast<int>(pool.size()));
      ac.seed = seed;
      ac.threads = rc.threads;
      ActiveTrainSettings ts;
      ts.train = tc;
      ts.train.max_epochs = rc.retrain_max_epochs;
      ts.range_margin = rc.range_margin;
      ts.time_grid = rc.sampler.time_grid();
      ActiveResult ar = active_loop(records_for(train_pool, initial), pool, labeler, validation.records, net,
                                    ac, ts, rc.game);
      write_acquisition_log(ar.log, (dir / "acquisition_log.csv").string());
      if (ar.iterations > 0) {
        phases.emplace_back("final_retrain", ar.last_history);
        outcome.history = ar.last_history;
      }
      outcome.train_solutions += static_cast<int>(ar.labeled.size());
      extra = {{"budget", ac.budget},
               {"iterations", ar.iterations},
               {"acquired", ar.labeled.size()},
               {"label_failures", ar.failed.size()}};
    }
    Models models;
    models.costate = &net;
    outcome.report = evaluate(models, test, sim);
    checkpoint["model"] = net.to_json();
  }

  write_json(checkpoint, (dir / "checkpoint.json").string());
  write_curve(phases, (dir / "curve.csv").string());
  write_case_csv(outcome.report, (dir / "cases.csv").string());
  nlohmann::json summary{{"variant", variant},
                         {"size", size},
                         {"seed", seed},
                         {"config_hash", hash_of(rc)},
                         {"code_version", kCodeVersion},
                         {"train_solutions", outcome.train_solutions},
                         {"training", history_json(outcome.history)},
                         {"evaluation", outcome.report.summary_json()}};
  if (!extra.empty()) summary["active"] = extra;
  write_json(summary, (dir / "summary.json").string());
  return outcome;
}

namespace {

struct LoadedModel {
  std::string variant;
  ValueNet value;
  CostateNet costate;
  Models models() const {
    Models m;
    if (variant == "value") {
      m.value = &value;
    } else {
      m.costate = &costate;
    }
    return m;
  }
  ControllerKind kind() const {
    return variant == "value" ? ControllerKind::kValueNetGrad : ControllerKind::kCostateNet;
  }
};

LoadedModel load_checkpoint(const std::string& path) {
  const nlohmann::json j = read_json(path);
  LoadedModel m;
  m.variant = j.at("variant").get<std::string>();
  if (m.variant == "value") {
    m.value = ValueNet::from_json(j.at("model"));
  } else {
    m.costate = CostateNet::from_json(j.at("model"));
  }
  return m;
}

}  // namespace

EvalReport cmd_evaluate(const RunConfig& rc, const std::string& checkpoint, const std::string& out_dir,
                        const std::string& report_prefix) {
  const LoadedModel m = load_checkpoint(checkpoint);
  const Dataset test = deserialize(DataPaths::in(out_dir).test);
  SimConfig sim = SimConfig::from_game(rc.game, m.kind());
  sim.threads = rc.threads;
  const EvalReport r = evaluate(m.models(), test, sim);
  write_case_csv(r, report_prefix + "cases.csv");
  nlohmann::json summary = r.summary_json();
  summary["checkpoint"] = checkpoint;
  summary["config_hash"] = hash_of(rc);
  summary["code_version"] = kCodeVersion;
  write_json(summary, report_prefix + "summary.json");
  return r;
}

SimResult cmd_simulate(const RunConfig& rc, const std::string& controller, const std::string& checkpoint,
                       const JointState& x0, const std::string& csv_path) {
  LoadedModel m;
  ControllerKind kind = controller_from_string(controller);
  if (kind == ControllerKind::kCostateNet || kind == ControllerKind::kValueNetGrad) {
    if (checkpoint.empty()) throw std::invalid_argument(controller + " needs --checkpoint");
    m = load_checkpoint(checkpoint);
    if (m.kind() != kind) throw std::invalid_argument("checkpoint does not hold a " + controller + " model");
  }
  Models models = m.models();
  if (kind == ControllerKind::kOracleBvp) {
    // Solve the game from x0 and replay the fitted parameters.
    const PipelineConfig pc = rc.pipeline();
    const LabeledSolution ls = label_point({x0.p1.d, x0.p1.v, x0.p2.d, x0.p2.v}, 0, pc);
    models.oracle = ParamPair{clip_to(ls.costate1, x0.t, rc.game), clip_to(ls.costate2, x0.t, rc.game)};
  }
  const SimConfig sim = SimConfig::from_game(rc.game, kind);
  const SimResult r = simulate(x0, sim, models);
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + csv_path);
  out << "t,d1,v1,d2,v2,u1,u2\n";
  char buf[256];
  for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
    const JointState& s = r.trajectory[k];
    const auto& u = r.controls[k];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.p1.d, s.p1.v, s.p2.d,
                  s.p2.v, u[0], u[1]);
    out << buf;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Comparison

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json variants = nlohmann::json::object();
    for (const auto& [v, c] : row.collisions) {
      variants[v] = {{"collision_mean", mean(c)},
                     {"collision_std", sample_std(c)},
                     {"collisions", c},
                     {"costate_error_mean", mean(row.errors.at(v))}};
    }
    rows_json.push_back({{"size", row.size},
                         {"variants", variants},
                         {"p_value_vs_costate_static", row.p_value_vs_static},
                         {"p_costate_static_vs_active", row.p_static_vs_active}});
  }
  return {{"rows", rows_json}, {"code_version", kCodeVersion}};
}

ComparisonReport cmd_compare(const std::string& out_dir) {
  const fs::path runs = fs::path(out_dir) / "runs";
  if (!fs::exists(runs)) throw IoError("no runs under " + out_dir);
  std::vector<fs::path> summaries;
  for (const auto& e : fs::recursive_directory_iterator(runs)) {
    if (e.is_regular_file() && e.path().filename() == "summary.json") summaries.push_back(e.path());
  }
  // Directory iteration order is unspecified.
  std::sort(summaries.begin(), summaries.end());

  std::map<int, SizeRow> by_size;
  std::map<int, std::map<std::string, std::vector<std::uint64_t>>> seeds;
  std::set<std::string> hashes;
  for (const auto& p : summaries) {
    const nlohmann::json j = read_json(p.string());
    const int size = j.at("size").get<int>();
    const std::string variant = j.at("variant").get<std::string>();
    SizeRow& row = by_size[size];
    row.size = size;
    row.collisions[variant].push_back(j.at("evaluation").at("collision_percentage").get<double>());
    row.errors[variant].push_back(j.at("evaluation").at("costate_error_mean").get<double>());
    seeds[size][variant].push_back(j.at("seed").get<std::uint64_t>());
    hashes.insert(j.at("config_hash").get<std::string>());
  }

  ComparisonReport rep;
  for (auto& [size, row] : by_size) {
    auto pair_p = [&](const std::string& lower, const std::string& higher) {
      if (!row.collisions.count(lower) || !row.collisions.count(higher)) return std::nan("");
      return welch_one_sided(row.collisions.at(lower), row.collisions.at(higher));
    };
    row.p_value_vs_static = pair_p("costate_static", "value");
    row.p_static_vs_active = pair_p("costate_active", "costate_static");
    rep.rows.push_back(row);
  }

  nlohmann::json j = rep.to_json();
  j["config_hashes"] = hashes;
  nlohmann::json seed_json = nlohmann::json::object();
  for (const auto& [size, m] : seeds) seed_json[std::to_string(size)] = m;
  j["seeds"] = seed_json;
  write_json(j, (fs::path(out_dir) / "comparison.json").string());

  std::ofstream csv((fs::path(out_dir) / "comparison.csv").string(), std::ios::binary);
  if (!csv) throw IoError("cannot write comparison.csv");
  csv << "size,variant,repeats,collision_mean,collision_std,costate_error_mean,p_value_vs_costate_static,"
         "p_costate_static_vs_active\n";
  char buf[256];
  for (const auto& row : rep.rows) {
    for (const auto& [v, c] : row.collisions) {
      std::snprintf(buf, sizeof(buf), "%d,%s,%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", row.size, v.c_str(), c.size(),
                    mean(c), sample_std(c), mean(row.errors.at(v)), row.p_value_vs_static,
                    row.p_static_vs_active);
      csv << buf;
    }
  }
  return rep;
}

ComparisonReport run_plan(const RunConfig& rc, const std::string& out_dir) {
  rc.validate();
  for (const auto& variant : rc.plan.variants) {
    for (int size : rc.plan.sizes) {
      for (int r = 0; r < rc.plan.repeats; ++r) cmd_train(rc, variant, size, rc.plan.seed(r), out_dir);
    }
  }
  return cmd_compare(out_dir);
}

}  // namespace costate
