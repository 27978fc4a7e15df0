#include "sstl/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sstl/error.hpp"
#include "sstl/rng.hpp"

namespace sstl::models {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

const std::vector<double>& dense(const Representation& r) {
  const auto* v = std::get_if<embedding::DocVector>(&r);
  if (!v) throw InvalidArgument("linear models expect mean-vector inputs");
  return v->values;
}

double target(Label l) { return l == Label::Abnormal ? 1.0 : 0.0; }

}  // namespace

void LinearModel::set_parameters(std::vector<double> w, double b) {
  const std::size_t d = w.size();
  set_parameters(std::move(w), b, std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
}

void LinearModel::set_parameters(std::vector<double> w, double b, std::vector<double> center,
                                 std::vector<double> scale) {
  if (center.size() != w.size() || scale.size() != w.size())
    throw InvalidArgument("centre and scale must match the weight dimension");
  for (const auto* v : {&w, &center, &scale})
    for (double x : *v)
      if (!std::isfinite(x)) throw InvalidArgument("non-finite linear model parameter");
  if (!std::isfinite(b)) throw InvalidArgument("non-finite bias");
  w_ = std::move(w);
  b_ = b;
  center_ = std::move(center);
  scale_ = std::move(scale);
  trained_ = true;
}

void LinearModel::initialize(const FeatureRefs& inputs) {
  const std::size_t dim = dense(inputs[0]).size();
  const double n = static_cast<double>(inputs.size());
  center_.assign(dim, 0.0);
  scale_.assign(dim, 1.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& x = dense(inputs[i]);
    if (x.size() != dim) throw InvalidArgument("inputs differ in dimension");
    for (std::size_t d = 0; d < dim; ++d) center_[d] += x[d] / n;
  }
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& x = dense(inputs[i]);
    for (std::size_t d = 0; d < dim; ++d) var[d] += (x[d] - center_[d]) * (x[d] - center_[d]) / n;
  }
  for (std::size_t d = 0; d < dim; ++d)
    if (var[d] > 0.0) scale_[d] = 1.0 / std::sqrt(var[d]);
  w_.assign(dim, 0.0);
  b_ = 0.0;
}

double LinearModel::decision_value(const Representation& input) const {
  const auto& x = dense(input);
  if (x.size() != w_.size())
    throw InvalidArgument("input dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(w_.size()));
  double z = b_;
  for (std::size_t d = 0; d < x.size(); ++d) z += w_[d] * feature(x, d);
  return z;
}

double LinearModel::log_loss(const FeatureRefs& inputs, std::span<const Label> labels,
                             double l2) const {
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double z = decision_value(inputs[i]);
    total += softplus(z) - target(labels[i]) * z;
  }
  double reg = 0.0;
  for (double w : w_) reg += w * w;
  return total / static_cast<double>(inputs.size()) + 0.5 * l2 * reg;
}

std::vector<double> LinearModel::log_loss_gradient(const FeatureRefs& inputs,
                                                   std::span<const Label> labels,
                                                   double l2) const {
  std::vector<double> g(w_.size() + 1, 0.0);
  const double n = static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& x = dense(inputs[i]);
    const double r = (sigmoid(decision_value(inputs[i])) - target(labels[i])) / n;
    for (std::size_t d = 0; d < x.size(); ++d) g[d] += r * feature(x, d);
    g.back() += r;
  }
  for (std::size_t d = 0; d < w_.size(); ++d) g[d] += l2 * w_[d];
  return g;
}

nlohmann::json LinearModel::linear_state() const {
  return {{"weights", w_}, {"bias", b_}, {"center", center_}, {"scale", scale_}};
}

void LinearModel::load_linear_state(const nlohmann::json& j) {
  auto w = j.at("weights").get<std::vector<double>>();
  const double b = j.at("bias").get<double>();
  if (j.contains("center") || j.contains("scale"))
    set_parameters(std::move(w), b, j.at("center").get<std::vector<double>>(),
                   j.at("scale").get<std::vector<double>>());
  else
    set_parameters(std::move(w), b);
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegression::LogisticRegression(ClassifierSpec spec) : LinearModel(std::move(spec)) {
  if (family() != Family::LR) throw InvalidArgument("LogisticRegression needs an LR spec");
}

std::unique_ptr<Classifier> LogisticRegression::clone() const {
  return std::make_unique<LogisticRegression>(*this);
}

double LogisticRegression::l2() const { return std::get<LrParams>(spec_.hyperparameters).l2; }

double LogisticRegression::loss(const FeatureRefs& inputs, std::span<const Label> labels) const {
  return log_loss(inputs, labels, l2());
}

std::vector<double> LogisticRegression::gradient(const FeatureRefs& inputs,
                                                 std::span<const Label> labels) const {
  return log_loss_gradient(inputs, labels, l2());
}

void LogisticRegression::descend(const FeatureRefs& inputs, std::span<const Label> labels,
                                 const TrainConfig& cfg) {
  const std::size_t n = inputs.size();
  const std::size_t batch = (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
  Rng rng(derive_seed(spec_.seed, 1000 + rounds_));
  ++rounds_;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  summary_.epoch_loss.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < n) rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      FeatureRefs xb;
      std::vector<Label> yb;
      const std::size_t end = std::min(n, start + batch);
      for (std::size_t k = start; k < end; ++k) {
        xb.push_back(inputs[order[k]]);
        yb.push_back(labels[order[k]]);
      }
      const auto g = gradient(xb, yb);
      for (std::size_t d = 0; d < w_.size(); ++d) w_[d] -= cfg.learning_rate * g[d];
      b_ -= cfg.learning_rate * g.back();
    }
    summary_.epoch_loss.push_back(loss(inputs, labels));
  }
  summary_.final_loss = summary_.epoch_loss.empty() ? loss(inputs, labels)
                                                    : summary_.epoch_loss.back();
}

void LogisticRegression::do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                                const TrainConfig& cfg) {
  initialize(inputs);
  rounds_ = 0;
  descend(inputs, labels, cfg);
}

void LogisticRegression::do_fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                                      const TrainConfig& cfg) {
  descend(inputs, labels, cfg);
}

double LogisticRegression::do_predict(const Representation& input) const {
  return sigmoid(decision_value(input));
}

// ---------------------------------------------------------------------------
// SGD

SgdClassifier::SgdClassifier(ClassifierSpec spec) : LinearModel(std::move(spec)) {
  if (family() != Family::SGD) throw InvalidArgument("SgdClassifier needs an SGD spec");
}

std::unique_ptr<Classifier> SgdClassifier::clone() const {
  return std::make_unique<SgdClassifier>(*this);
}

double SgdClassifier::l2() const { return std::get<SgdParams>(spec_.hyperparameters).l2; }

double SgdClassifier::loss(const FeatureRefs& inputs, std::span<const Label> labels) const {
  return log_loss(inputs, labels, l2());
}

std::vector<double> SgdClassifier::gradient(const FeatureRefs& inputs,
                                            std::span<const Label> labels) const {
  return log_loss_gradient(inputs, labels, l2());
}

void SgdClassifier::run_epochs(const FeatureRefs& inputs, std::span<const Label> labels,
                               const TrainConfig& cfg) {
  const double lambda = l2();
  Rng rng(derive_seed(spec_.seed, 1000 + rounds_));
  ++rounds_;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  summary_.epoch_loss.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const auto& x = dense(inputs[i]);
      const double r = sigmoid(decision_value(inputs[i])) - target(labels[i]);
      for (std::size_t d = 0; d < w_.size(); ++d)
        w_[d] -= cfg.learning_rate * (r * feature(x, d) + lambda * w_[d]);
      b_ -= cfg.learning_rate * r;
    }
    summary_.epoch_loss.push_back(loss(inputs, labels));
  }
  summary_.final_loss = summary_.epoch_loss.empty() ? loss(inputs, labels)
                                                    : summary_.epoch_loss.back();
}

void SgdClassifier::do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                           const TrainConfig& cfg) {
  initialize(inputs);
  rounds_ = 0;
  run_epochs(inputs, labels, cfg);
}

void SgdClassifier::do_fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                                 const TrainConfig& cfg) {
  run_epochs(inputs, labels, cfg);
}

double SgdClassifier::do_predict(const Representation& input) const {
  return sigmoid(decision_value(input));
}

nlohmann::json SgdClassifier::do_state() const {
  auto j = linear_state();
  j["rounds"] = rounds_;
  return j;
}

void SgdClassifier::do_load_state(const nlohmann::json& j) {
  load_linear_state(j);
  rounds_ = j.value("rounds", std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Linear SVM

std::pair<double, double> fit_logistic_link(std::span<const double> f,
                                            std::span<const Label> labels) {
  // Newton iterations on the regularised Platt objective (Lin, Lin & Weng).
  double n_pos = 0, n_neg = 0;
  for (Label l : labels) (l == Label::Abnormal ? n_pos : n_neg) += 1;
  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> t(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) t[i] = labels[i] == Label::Abnormal ? hi : lo;

  // p = sigmoid(a f + c); minimise sum -t log p - (1 - t) log(1 - p).
  double a = 0.0, c = std::log((n_pos + 1.0) / (n_neg + 1.0));
  auto objective = [&](double aa, double cc) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double z = aa * f[i] + cc;
      s += softplus(z) - t[i] * z;
    }
    return s;
  };
  double obj = objective(a, c);
  for (int iter = 0; iter < 100; ++iter) {
    double g1 = 0, g2 = 0, h11 = 1e-12, h22 = 1e-12, h21 = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double p = sigmoid(a * f[i] + c);
      const double d = p - t[i];
      const double w = p * (1.0 - p);
      g1 += d * f[i];
      g2 += d;
      h11 += w * f[i] * f[i];
      h22 += w;
      h21 += w * f[i];
    }
    if (std::abs(g1) < 1e-10 && std::abs(g2) < 1e-10) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double dc = -(-h21 * g1 + h11 * g2) / det;
    double step = 1.0;
    bool improved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nc = c + step * dc;
      const double nobj = objective(na, nc);
      if (nobj < obj + 1e-4 * step * (g1 * da + g2 * dc)) {
        a = na;
        c = nc;
        obj = nobj;
        improved = true;
        break;
      }
      step /= 2.0;
    }
    if (!improved) break;
  }
  return {a, c};
}

LinearSvm::LinearSvm(ClassifierSpec spec) : LinearModel(std::move(spec)) {
  if (family() != Family::SVM) throw InvalidArgument("LinearSvm needs an SVM spec");
}

std::unique_ptr<Classifier> LinearSvm::clone() const { return std::make_unique<LinearSvm>(*this); }

const SvmParams& LinearSvm::params() const { return std::get<SvmParams>(spec_.hyperparameters); }

void LinearSvm::train(const FeatureRefs& inputs, std::span<const Label> labels,
                      const TrainConfig& cfg) {
  const double lambda = params().lambda;
  Rng rng(derive_seed(spec_.seed, 1000 + rounds_));
  ++rounds_;

  // Stratified calibration slice, unless it would leave a class unrepresented.
  std::vector<std::size_t> fit_idx, cal_idx;
  {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < inputs.size(); ++i) by_class[corpus::index_of(labels[i])].push_back(i);
    std::vector<char> is_cal(inputs.size(), 0);
    bool usable = params().calibration_fraction > 0.0;
    for (auto& members : by_class) {
      const std::size_t take = corpus::round_half_up(params().calibration_fraction *
                                                     static_cast<double>(members.size()));
      if (take == 0 || take >= members.size()) usable = false;
      rng.shuffle(members);
      for (std::size_t k = 0; k < take && k < members.size(); ++k) is_cal[members[k]] = 1;
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (usable && is_cal[i]) cal_idx.push_back(i);
      else fit_idx.push_back(i);
    }
    if (!usable) cal_idx = fit_idx;
  }

  // Pegasos: step 1/(lambda t), bias folded in as a constant feature, and
  // projection onto the ball of radius 1/sqrt(lambda).
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<std::size_t> order = fit_idx;
  summary_.epoch_loss.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++steps_;
      const double eta = 1.0 / (lambda * static_cast<double>(steps_));
      const auto& x = dense(inputs[i]);
      const double y = labels[i] == Label::Abnormal ? 1.0 : -1.0;
      const double margin = y * decision_value(inputs[i]);
      const double shrink = 1.0 - eta * lambda;
      for (auto& w : w_) w *= shrink;
      b_ *= shrink;
      if (margin < 1.0) {
        for (std::size_t d = 0; d < w_.size(); ++d) w_[d] += eta * y * feature(x, d);
        b_ += eta * y;
      }
      double norm2 = b_ * b_;
      for (double w : w_) norm2 += w * w;
      const double norm = std::sqrt(norm2);
      if (norm > radius) {
        const double s = radius / norm;
        for (auto& w : w_) w *= s;
        b_ *= s;
      }
    }
    double hinge = 0.0, reg = b_ * b_;
    for (double w : w_) reg += w * w;
    for (std::size_t i : fit_idx) {
      const double y = labels[i] == Label::Abnormal ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - y * decision_value(inputs[i]));
    }
    summary_.epoch_loss.push_back(0.5 * lambda * reg + hinge / static_cast<double>(fit_idx.size()));
  }
  if (!summary_.epoch_loss.empty()) summary_.final_loss = summary_.epoch_loss.back();

  std::vector<double> f;
  std::vector<Label> y;
  for (std::size_t i : cal_idx) {
    f.push_back(decision_value(inputs[i]));
    y.push_back(labels[i]);
  }
  std::tie(link_a_, link_c_) = fit_logistic_link(f, y);
}

void LinearSvm::do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                       const TrainConfig& cfg) {
  initialize(inputs);
  steps_ = 0;
  rounds_ = 0;
  train(inputs, labels, cfg);
}

void LinearSvm::do_fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                             const TrainConfig& cfg) {
  train(inputs, labels, cfg);
}

double LinearSvm::do_predict(const Representation& input) const {
  return sigmoid(link_a_ * decision_value(input) + link_c_);
}

nlohmann::json LinearSvm::do_state() const {
  auto j = linear_state();
  j["link"] = {link_a_, link_c_};
  j["steps"] = steps_;
  j["rounds"] = rounds_;
  return j;
}

void LinearSvm::do_load_state(const nlohmann::json& j) {
  load_linear_state(j);
  auto link = j.at("link").get<std::vector<double>>();
  if (link.size() != 2) throw InvalidArgument("SVM link must have two coefficients");
  link_a_ = link[0];
  link_c_ = link[1];
  steps_ = j.value("steps", std::uint64_t{0});
  rounds_ = j.value("rounds", std::uint64_t{0});
}

}  // namespace sstl::models
