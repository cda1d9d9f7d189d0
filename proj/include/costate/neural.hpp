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

// Small dense tanh networks with hand-written reverse mode.
//
// Batches are column-major: one example per column. Layer sizes follow the
// "fc5-(fc16-tanh)x3-(fcN-tanh)" pattern, i.e. {5, 16, 16, 16, N}, with tanh
// after every affine map including the last.

#pragma once

#include "costate/costate_repr.hpp"
#include "costate/game_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace costate {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

class Mlp {
 public:
  Mlp() = default;
  // Weights and biases uniform in +-1/sqrt(fan_in).
  Mlp(std::vector<int> sizes, std::uint64_t seed);

  static std::vector<int> standard_sizes(int outputs) { return {5, 16, 16, 16, outputs}; }

  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::string architecture() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  // Parameter gradients of sum_b <dy_b, y_b> for the given output
  // sensitivities dy (outputs x batch).
  MlpGradients backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) const;

  // d y / d x for a single input (outputs x inputs).
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x) const;

  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& p);
  static std::vector<double> flatten(const MlpGradients& g);

  std::vector<Eigen::MatrixXd>& weights() { return w_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

// Mean squared error over all entries and its gradient w.r.t. predictions.
double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);
Eigen::MatrixXd mse_output_gradient(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

// Affine per-channel map z = (x - offset) / scale.
struct InputNormalizer {
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(5);

  // Maps [lo, hi] per channel onto [-1, 1].
  static InputNormalizer from_ranges(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  // Ranges taken from the columns of raw (inputs x batch).
  static InputNormalizer fit(const Eigen::MatrixXd& raw);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

// Per-channel map between tanh space (-1, 1) and physical [lo, hi].
struct OutputRange {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  // Observed min/max widened by margin * span (split evenly on both sides).
  static OutputRange fit(const Eigen::MatrixXd& labels, double margin);

  Eigen::MatrixXd to_physical(const Eigen::MatrixXd& unit) const;
  Eigen::MatrixXd to_unit(const Eigen::MatrixXd& physical) const;
};

Eigen::VectorXd network_input(const JointState& x);
Eigen::MatrixXd network_inputs(const std::vector<JointState>& xs);

// Trainable model interface: everything is expressed on raw inputs
// (d1, v1, d2, v2, t) and targets already mapped to tanh space.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual Eigen::MatrixXd predict_unit(const Eigen::MatrixXd& raw) const = 0;
  // MSE loss; fills the flattened parameter gradient.
  virtual double loss_and_gradient(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target,
                                   std::vector<double>& grad) const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(const std::vector<double>& p) = 0;

  double loss(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target) const {
    return mse(predict_unit(raw), target);
  }
};

struct GateConfig {
  double steepness = 1.0;  // 1/m
  double exit_position = 38.75;  // m, (R + W)/2 + L for the default geometry

  static GateConfig from_game(const GameConfig& cfg) { return {1.0, cfg.zone_exit()}; }
};

// V = eta mu + (1 - eta) nu with eta = logistic(k (max(d1, d2) - d_exit)).
class ValueNet : public Regressor {
 public:
  ValueNet() = default;
  ValueNet(const GateConfig& gate, std::uint64_t seed);

  Mlp& mu() { return mu_; }
  Mlp& nu() { return nu_; }
  const Mlp& mu() const { return mu_; }
  const Mlp& nu() const { return nu_; }
  GateConfig& gate() { return gate_; }
  InputNormalizer& normalizer() { return norm_; }
  OutputRange& range() { return range_; }
  const InputNormalizer& normalizer() const { return norm_; }
  const OutputRange& range() const { return range_; }

  double gate_value(const Eigen::VectorXd& raw) const;

  // (V1, V2) in loss units.
  std::pair<double, double> value_forward(const JointState& x) const;
  // d V_i / d(d1, v1, d2, v2, t) in physical units, gate included.
  Eigen::VectorXd input_gradient(const JointState& x, Player i) const;

  Eigen::MatrixXd predict_unit(const Eigen::MatrixXd& raw) const override;
  double loss_and_gradient(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target,
                           std::vector<double>& grad) const override;
  std::vector<double> parameters() const override;
  void set_parameters(const std::vector<double>& p) override;

  nlohmann::json to_json() const;
  static ValueNet from_json(const nlohmann::json& j);

 private:
  Eigen::RowVectorXd gates(const Eigen::MatrixXd& raw) const;

  Mlp mu_;
  Mlp nu_;
  GateConfig gate_;
  InputNormalizer norm_;
  OutputRange range_;
};

// Eight outputs: (lamT2, t_in, t_out, q) for player 1 then player 2.
class CostateNet : public Regressor {
 public:
  CostateNet() = default;
  CostateNet(std::uint64_t seed, double horizon_T);

  // lamT2 in [-30, 30], times in [0, T], q in [0, 3 alpha].
  static OutputRange default_range(const GameConfig& cfg);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  InputNormalizer& normalizer() { return norm_; }
  OutputRange& range() { return range_; }
  const InputNormalizer& normalizer() const { return norm_; }
  const OutputRange& range() const { return range_; }
  double horizon() const { return horizon_T_; }

  std::pair<CostateParams, CostateParams> predict_costate(const JointState& x) const;
  // Same mapping applied to raw tanh outputs (length 8).
  std::pair<CostateParams, CostateParams> params_from_unit(const Eigen::VectorXd& unit) const;

  Eigen::MatrixXd predict_unit(const Eigen::MatrixXd& raw) const override;
  double loss_and_gradient(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target,
                           std::vector<double>& grad) const override;
  std::vector<double> parameters() const override;
  void set_parameters(const std::vector<double>& p) override;

  nlohmann::json to_json() const;
  static CostateNet from_json(const nlohmann::json& j);

 private:
  Mlp net_;
  InputNormalizer norm_;
  OutputRange range_;
  double horizon_T_ = 3.0;
};

Eigen::VectorXd costate_label_vector(const CostateParams& p1, const CostateParams& p2);

struct TrainConfig {
  double learning_rate = 0.01;
  int patience_epochs = 500;
  int max_epochs = 100000;
  // Cumulative count of epochs above the best validation error; false
  // resets the count whenever a new best appears.
  bool cumulative_patience = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;
  double best_validation = 0.0;
  int stopped_epoch = 0;
};

// Counts epochs whose validation error exceeds the best seen so far.
class PatienceCounter {
 public:
  PatienceCounter(int patience, bool cumulative) : patience_(patience), cumulative_(cumulative) {}

  // Returns true when training should stop.
  bool update(double validation_error);
  int count() const { return count_; }
  double best() const { return best_; }
  bool improved() const { return improved_; }

 private:
  int patience_;
  bool cumulative_;
  int count_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
  bool improved_ = false;
};

// Plain full-batch gradient descent with early stopping. The model ends at
// the parameters with the lowest validation error seen.
TrainHistory train_full_batch(Regressor& model, const Eigen::MatrixXd& train_x,
                              const Eigen::MatrixXd& train_y, const Eigen::MatrixXd& val_x,
                              const Eigen::MatrixXd& val_y, const TrainConfig& tc);

}  // namespace costate
