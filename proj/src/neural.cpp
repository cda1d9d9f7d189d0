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

#include "costate/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace costate {

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

constexpr int kCheckpointVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw DimensionMismatch("Mlp needs at least an input and an output layer");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(sizes_[l + 1], fan_in);
    Eigen::VectorXd b(sizes_[l + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = dist(rng);
    w_.push_back(std::move(w));
    b_.push_back(std::move(b));
  }
}

std::string Mlp::architecture() const {
  // fc5-(fc16-tanh)x3-(fc2-tanh) for {5, 16, 16, 16, 2}
  std::string s = "fc" + std::to_string(sizes_.front());
  std::size_t l = 1;
  while (l < sizes_.size()) {
    std::size_t run = 1;
    while (l + run < sizes_.size() && sizes_[l + run] == sizes_[l]) ++run;
    if (l + run == sizes_.size() && run > 1) --run;  // keep the head separate
    s += "-(fc" + std::to_string(sizes_[l]) + "-tanh)";
    if (run > 1) s += "x" + std::to_string(run);
    l += run;
  }
  return s;
}

void Mlp::check_input(Eigen::Index rows) const {
  if (sizes_.empty()) throw DimensionMismatch("Mlp is empty");
  if (rows != sizes_.front()) {
    throw DimensionMismatch("Mlp expects " + std::to_string(sizes_.front()) + " inputs, got " +
                            std::to_string(rows));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  check_input(x.rows());
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z = w_[l] * a;
    z.colwise() += b_[l];
    a = z.array().tanh().matrix();
  }
  return a;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

MlpGradients Mlp::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) const {
  check_input(x.rows());
  if (dy.rows() != outputs() || dy.cols() != x.cols()) {
    throw DimensionMismatch("backward: output gradient shape does not match the batch");
  }
  std::vector<Eigen::MatrixXd> act;
  act.reserve(w_.size() + 1);
  act.push_back(x);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Eigen::MatrixXd z = w_[l] * act.back();
    z.colwise() += b_[l];
    act.push_back(z.array().tanh().matrix());
  }

  MlpGradients g;
  g.weights.resize(w_.size());
  g.biases.resize(w_.size());
  Eigen::MatrixXd delta = (dy.array() * (1.0 - act.back().array().square())).matrix();
  for (std::size_t l = w_.size(); l-- > 0;) {
    g.weights[l] = delta * act[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = ((w_[l].transpose() * delta).array() * (1.0 - act[l].array().square())).matrix();
    }
  }
  return g;
}

Eigen::MatrixXd Mlp::input_jacobian(const Eigen::VectorXd& x) const {
  check_input(x.size());
  std::vector<Eigen::VectorXd> act;
  act.push_back(x);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    act.push_back((w_[l] * act.back() + b_[l]).array().tanh().matrix());
  }
  Eigen::MatrixXd g = (1.0 - act.back().array().square()).matrix().asDiagonal();
  for (std::size_t l = w_.size(); l-- > 0;) {
    g = g * w_[l];
    if (l > 0) g = g * (1.0 - act[l].array().square()).matrix().asDiagonal();
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
  return n;
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  for (std::size_t l = 0; l < w_.size(); ++l) {
    p.insert(p.end(), w_[l].data(), w_[l].data() + w_[l].size());
    p.insert(p.end(), b_[l].data(), b_[l].data() + b_[l].size());
  }
  return p;
}

void Mlp::set_parameters(const std::vector<double>& p) {
  if (p.size() != parameter_count()) throw DimensionMismatch("set_parameters: wrong parameter count");
  std::size_t k = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(k), w_[l].size(), w_[l].data());
    k += w_[l].size();
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(k), b_[l].size(), b_[l].data());
    k += b_[l].size();
  }
}

std::vector<double> Mlp::flatten(const MlpGradients& g) {
  std::vector<double> p;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    p.insert(p.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    p.insert(p.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  return p;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["architecture"] = architecture();
  j["sizes"] = sizes_;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < w_.size(); ++l) {
    j["weights"].push_back(matrix_to_json(w_[l]));
    j["biases"].push_back(vector_to_json(b_[l]));
  }
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.sizes_ = j.at("sizes").get<std::vector<int>>();
  for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
    m.w_.push_back(matrix_from_json(j.at("weights")[l]));
    m.b_.push_back(vector_from_json(j.at("biases")[l]));
    if (m.w_.back().rows() != m.sizes_[l + 1] || m.w_.back().cols() != m.sizes_[l]) {
      throw DimensionMismatch("checkpoint layer " + std::to_string(l) + " has the wrong shape");
    }
  }
  return m;
}

double mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionMismatch("mse: prediction and target shapes differ");
  }
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Eigen::MatrixXd mse_output_gradient(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  return 2.0 * (pred - target) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Normalization

InputNormalizer InputNormalizer::from_ranges(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  InputNormalizer n;
  n.offset = 0.5 * (lo + hi);
  n.scale = 0.5 * (hi - lo);
  for (Eigen::Index k = 0; k < n.scale.size(); ++k) {
    if (!(n.scale[k] > 0.0)) n.scale[k] = 1.0;
  }
  return n;
}

InputNormalizer InputNormalizer::fit(const Eigen::MatrixXd& raw) {
  return from_ranges(raw.rowwise().minCoeff(), raw.rowwise().maxCoeff());
}

Eigen::MatrixXd InputNormalizer::apply(const Eigen::MatrixXd& raw) const {
  if (raw.rows() != offset.size()) throw DimensionMismatch("normalizer: wrong input dimension");
  return (raw.colwise() - offset).array().colwise() / scale.array();
}

OutputRange OutputRange::fit(const Eigen::MatrixXd& labels, double margin) {
  OutputRange r;
  r.lo = labels.rowwise().minCoeff();
  r.hi = labels.rowwise().maxCoeff();
  for (Eigen::Index k = 0; k < r.lo.size(); ++k) {
    double span = r.hi[k] - r.lo[k];
    if (!(span > 0.0)) span = std::max(1.0, std::abs(r.hi[k]));
    r.lo[k] -= 0.5 * margin * span;
    r.hi[k] += 0.5 * margin * span;
  }
  return r;
}

Eigen::MatrixXd OutputRange::to_physical(const Eigen::MatrixXd& unit) const {
  const Eigen::VectorXd half = 0.5 * (hi - lo);
  const Eigen::VectorXd mid = 0.5 * (hi + lo);
  return ((unit.array().colwise() * half.array()).colwise() + mid.array()).matrix();
}

Eigen::MatrixXd OutputRange::to_unit(const Eigen::MatrixXd& physical) const {
  const Eigen::VectorXd half = 0.5 * (hi - lo);
  const Eigen::VectorXd mid = 0.5 * (hi + lo);
  return ((physical.array().colwise() - mid.array()).colwise() / half.array()).matrix();
}

Eigen::VectorXd network_input(const JointState& x) {
  Eigen::VectorXd v(5);
  v << x.p1.d, x.p1.v, x.p2.d, x.p2.v, x.t;
  return v;
}

Eigen::MatrixXd network_inputs(const std::vector<JointState>& xs) {
  Eigen::MatrixXd m(5, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = network_input(xs[k]);
  return m;
}

// ---------------------------------------------------------------------------
// ValueNet

ValueNet::ValueNet(const GateConfig& gate, std::uint64_t seed)
    : mu_(Mlp::standard_sizes(2), seed),
      nu_(Mlp::standard_sizes(2), seed ^ 0x9e3779b97f4a7c15ULL),
      gate_(gate) {
  range_.lo = Eigen::VectorXd::Constant(2, -1.0);
  range_.hi = Eigen::VectorXd::Constant(2, 1.0);
}

double ValueNet::gate_value(const Eigen::VectorXd& raw) const {
  return logistic(gate_.steepness * (std::max(raw[0], raw[2]) - gate_.exit_position));
}

Eigen::RowVectorXd ValueNet::gates(const Eigen::MatrixXd& raw) const {
  Eigen::RowVectorXd eta(raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) eta[c] = gate_value(raw.col(c));
  return eta;
}

Eigen::MatrixXd ValueNet::predict_unit(const Eigen::MatrixXd& raw) const {
  const Eigen::MatrixXd z = norm_.apply(raw);
  const Eigen::RowVectorXd eta = gates(raw);
  const Eigen::MatrixXd m = mu_.forward(z);
  const Eigen::MatrixXd n = nu_.forward(z);
  return (m.array().rowwise() * eta.array() + n.array().rowwise() * (1.0 - eta.array())).matrix();
}

double ValueNet::loss_and_gradient(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target,
                                   std::vector<double>& grad) const {
  const Eigen::MatrixXd z = norm_.apply(raw);
  const Eigen::RowVectorXd eta = gates(raw);
  const Eigen::MatrixXd m = mu_.forward(z);
  const Eigen::MatrixXd n = nu_.forward(z);
  const Eigen::MatrixXd pred =
      (m.array().rowwise() * eta.array() + n.array().rowwise() * (1.0 - eta.array())).matrix();
  const Eigen::MatrixXd dy = mse_output_gradient(pred, target);
  const Eigen::MatrixXd dm = (dy.array().rowwise() * eta.array()).matrix();
  const Eigen::MatrixXd dn = (dy.array().rowwise() * (1.0 - eta.array())).matrix();
  grad = Mlp::flatten(mu_.backward(z, dm));
  const auto gn = Mlp::flatten(nu_.backward(z, dn));
  grad.insert(grad.end(), gn.begin(), gn.end());
  return mse(pred, target);
}

std::vector<double> ValueNet::parameters() const {
  auto p = mu_.parameters();
  const auto q = nu_.parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

void ValueNet::set_parameters(const std::vector<double>& p) {
  const std::size_t nm = mu_.parameter_count();
  if (p.size() != nm + nu_.parameter_count()) throw DimensionMismatch("ValueNet: wrong parameter count");
  mu_.set_parameters(std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nm)));
  nu_.set_parameters(std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(nm), p.end()));
}

std::pair<double, double> ValueNet::value_forward(const JointState& x) const {
  const Eigen::MatrixXd v = range_.to_physical(predict_unit(network_input(x)));
  return {v(0, 0), v(1, 0)};
}

Eigen::VectorXd ValueNet::input_gradient(const JointState& x, Player i) const {
  const Eigen::VectorXd raw = network_input(x);
  const Eigen::VectorXd z = norm_.apply(raw);
  const int row = index(i);
  const double eta = gate_value(raw);
  const Eigen::MatrixXd jm = mu_.input_jacobian(z);
  const Eigen::MatrixXd jn = nu_.input_jacobian(z);
  Eigen::VectorXd g = (eta * jm.row(row) + (1.0 - eta) * jn.row(row)).transpose();
  g = g.cwiseQuotient(norm_.scale);

  // Gate term: d eta / d d_k on whichever player is further along.
  const double spread = mu_.forward(z)[row] - nu_.forward(z)[row];
  const double deta = gate_.steepness * eta * (1.0 - eta);
  g[raw[0] >= raw[2] ? 0 : 2] += spread * deta;

  const double half = 0.5 * (range_.hi[row] - range_.lo[row]);
  return half * g;
}

nlohmann::json ValueNet::to_json() const {
  nlohmann::json j;
  j["kind"] = "value_net";
  j["version"] = kCheckpointVersion;
  j["mu"] = mu_.to_json();
  j["nu"] = nu_.to_json();
  j["gate"] = {{"steepness", gate_.steepness}, {"exit_position", gate_.exit_position}};
  j["input_offset"] = vector_to_json(norm_.offset);
  j["input_scale"] = vector_to_json(norm_.scale);
  j["output_lo"] = vector_to_json(range_.lo);
  j["output_hi"] = vector_to_json(range_.hi);
  return j;
}

ValueNet ValueNet::from_json(const nlohmann::json& j) {
  if (j.at("kind") != "value_net" || j.at("version") != kCheckpointVersion) {
    throw std::runtime_error("not a value_net checkpoint of version " + std::to_string(kCheckpointVersion));
  }
  ValueNet v;
  v.mu_ = Mlp::from_json(j.at("mu"));
  v.nu_ = Mlp::from_json(j.at("nu"));
  v.gate_ = {j.at("gate").at("steepness").get<double>(), j.at("gate").at("exit_position").get<double>()};
  v.norm_.offset = vector_from_json(j.at("input_offset"));
  v.norm_.scale = vector_from_json(j.at("input_scale"));
  v.range_.lo = vector_from_json(j.at("output_lo"));
  v.range_.hi = vector_from_json(j.at("output_hi"));
  return v;
}

// ---------------------------------------------------------------------------
// CostateNet

CostateNet::CostateNet(std::uint64_t seed, double horizon_T)
    : net_(Mlp::standard_sizes(8), seed), horizon_T_(horizon_T) {
  GameConfig cfg;
  cfg.horizon_T = horizon_T;
  range_ = default_range(cfg);
}

OutputRange CostateNet::default_range(const GameConfig& cfg) {
  OutputRange r;
  r.lo.resize(8);
  r.hi.resize(8);
  for (int p = 0; p < 2; ++p) {
    r.lo.segment<4>(4 * p) << -30.0, 0.0, 0.0, 0.0;
    r.hi.segment<4>(4 * p) << 30.0, cfg.horizon_T, cfg.horizon_T, 3.0 * cfg.alpha;
  }
  return r;
}

std::pair<CostateParams, CostateParams> CostateNet::params_from_unit(const Eigen::VectorXd& unit) const {
  if (unit.size() != 8) throw DimensionMismatch("CostateNet expects 8 outputs");
  const Eigen::VectorXd phys = range_.to_physical(unit);
  auto player = [&](int p) {
    const double a = std::clamp(phys[4 * p + 1], 0.0, horizon_T_);
    const double b = std::clamp(phys[4 * p + 2], 0.0, horizon_T_);
    return CostateParams{phys[4 * p], std::min(a, b), std::max(a, b), phys[4 * p + 3]};
  };
  return {player(0), player(1)};
}

std::pair<CostateParams, CostateParams> CostateNet::predict_costate(const JointState& x) const {
  return params_from_unit(predict_unit(network_input(x)).col(0));
}

Eigen::MatrixXd CostateNet::predict_unit(const Eigen::MatrixXd& raw) const {
  return net_.forward(norm_.apply(raw));
}

double CostateNet::loss_and_gradient(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& target,
                                     std::vector<double>& grad) const {
  const Eigen::MatrixXd z = norm_.apply(raw);
  const Eigen::MatrixXd pred = net_.forward(z);
  grad = Mlp::flatten(net_.backward(z, mse_output_gradient(pred, target)));
  return mse(pred, target);
}

std::vector<double> CostateNet::parameters() const { return net_.parameters(); }

void CostateNet::set_parameters(const std::vector<double>& p) { net_.set_parameters(p); }

nlohmann::json CostateNet::to_json() const {
  nlohmann::json j;
  j["kind"] = "costate_net";
  j["version"] = kCheckpointVersion;
  j["net"] = net_.to_json();
  j["horizon_T"] = horizon_T_;
  j["input_offset"] = vector_to_json(norm_.offset);
  j["input_scale"] = vector_to_json(norm_.scale);
  j["output_lo"] = vector_to_json(range_.lo);
  j["output_hi"] = vector_to_json(range_.hi);
  return j;
}

CostateNet CostateNet::from_json(const nlohmann::json& j) {
  if (j.at("kind") != "costate_net" || j.at("version") != kCheckpointVersion) {
    throw std::runtime_error("not a costate_net checkpoint of version " + std::to_string(kCheckpointVersion));
  }
  CostateNet c;
  c.net_ = Mlp::from_json(j.at("net"));
  c.horizon_T_ = j.at("horizon_T").get<double>();
  c.norm_.offset = vector_from_json(j.at("input_offset"));
  c.norm_.scale = vector_from_json(j.at("input_scale"));
  c.range_.lo = vector_from_json(j.at("output_lo"));
  c.range_.hi = vector_from_json(j.at("output_hi"));
  return c;
}

Eigen::VectorXd costate_label_vector(const CostateParams& p1, const CostateParams& p2) {
  Eigen::VectorXd y(8);
  y << p1.lamT2, p1.t_in, p1.t_out, p1.q, p2.lamT2, p2.t_in, p2.t_out, p2.q;
  return y;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (patience_epochs < 1) throw std::invalid_argument("patience_epochs must be at least 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
}

bool PatienceCounter::update(double validation_error) {
  if (!seen_ || validation_error < best_) {
    best_ = validation_error;
    seen_ = true;
    improved_ = true;
    if (!cumulative_) count_ = 0;
  } else {
    improved_ = false;
    if (validation_error > best_) ++count_;
  }
  return count_ >= patience_;
}

TrainHistory train_full_batch(Regressor& model, const Eigen::MatrixXd& train_x,
                              const Eigen::MatrixXd& train_y, const Eigen::MatrixXd& val_x,
                              const Eigen::MatrixXd& val_y, const TrainConfig& tc) {
  tc.validate();
  TrainHistory h;
  PatienceCounter counter(tc.patience_epochs, tc.cumulative_patience);
  std::vector<double> params = model.parameters();
  std::vector<double> best = params;
  std::vector<double> grad;

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double loss = model.loss_and_gradient(train_x, train_y, grad);
    const double val = model.loss(val_x, val_y);
    if (!std::isfinite(loss) || !std::isfinite(val)) {
      throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + " (train " +
                          std::to_string(loss) + ", validation " + std::to_string(val) + ")");
    }
    h.train_loss.push_back(loss);
    h.validation_loss.push_back(val);
    h.stopped_epoch = epoch;
    const bool stop = counter.update(val);
    if (counter.improved()) {
      best = params;
      h.best_epoch = epoch;
      h.best_validation = val;
    }
    if (stop) break;
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= tc.learning_rate * grad[k];
    model.set_parameters(params);
  }
  model.set_parameters(best);
  return h;
}

}  // namespace costate
