#include "sstl/cnn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "sstl/adam.hpp"
#include "sstl/error.hpp"
#include "sstl/rng.hpp"

namespace sstl::models {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy from the logit: softplus(z) - y z.
double bce_from_logit(double z, double y) {
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - y * z;
}

}  // namespace

CnnLayout CnnLayout::make(std::size_t dim, const CnnParams& arch) {
  CnnLayout l;
  l.dim = dim;
  l.filter_sizes = arch.filter_sizes;
  l.filters = arch.filters_per_size;
  std::size_t off = 0;
  for (std::size_t h : l.filter_sizes) {
    l.weight_offset.push_back(off);
    off += l.filters * h * dim;
    l.bias_offset.push_back(off);
    off += l.filters;
  }
  l.dense_offset = off;
  off += l.features();
  l.dense_bias_offset = off;
  l.total = off + 1;
  return l;
}

std::span<const double> CnnGradients::conv_weights(std::size_t s) const {
  return {values.data() + layout.weight_offset[s],
          layout.filters * layout.filter_sizes[s] * layout.dim};
}
std::span<const double> CnnGradients::conv_bias(std::size_t s) const {
  return {values.data() + layout.bias_offset[s], layout.filters};
}
std::span<const double> CnnGradients::dense_weights() const {
  return {values.data() + layout.dense_offset, layout.features()};
}

// ---------------------------------------------------------------------------

CnnClassifier::CnnClassifier(ClassifierSpec spec) : Classifier(std::move(spec)) {
  if (family() != Family::CNN) throw InvalidArgument("CnnClassifier needs a CNN spec");
}

std::unique_ptr<Classifier> CnnClassifier::clone() const {
  return std::make_unique<CnnClassifier>(*this);
}

const CnnParams& CnnClassifier::architecture() const {
  return std::get<CnnParams>(spec_.hyperparameters);
}

void CnnClassifier::initialize(std::size_t embedding_dim) {
  if (embedding_dim == 0) throw InvalidArgument("embedding dimension must be > 0");
  layout_ = CnnLayout::make(embedding_dim, architecture());
  params_.assign(layout_.total, 0.0);
  Rng rng(derive_seed(spec_.seed, 0));
  // Glorot-uniform with Keras' Conv1D fan convention.
  for (std::size_t s = 0; s < layout_.filter_sizes.size(); ++s) {
    const double h = static_cast<double>(layout_.filter_sizes[s]);
    const double fan_in = h * static_cast<double>(embedding_dim);
    const double fan_out = h * static_cast<double>(layout_.filters);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const std::size_t n = layout_.filters * layout_.filter_sizes[s] * embedding_dim;
    for (std::size_t i = 0; i < n; ++i)
      params_[layout_.weight_offset[s] + i] = rng.uniform(-limit, limit);
  }
  const double limit = std::sqrt(6.0 / (static_cast<double>(layout_.features()) + 1.0));
  for (std::size_t j = 0; j < layout_.features(); ++j)
    params_[layout_.dense_offset + j] = rng.uniform(-limit, limit);
}

std::span<const double> CnnClassifier::conv_weights(std::size_t s) const {
  return {params_.data() + layout_.weight_offset[s],
          layout_.filters * layout_.filter_sizes[s] * layout_.dim};
}
std::span<const double> CnnClassifier::conv_bias(std::size_t s) const {
  return {params_.data() + layout_.bias_offset[s], layout_.filters};
}
std::span<const double> CnnClassifier::dense_weights() const {
  return {params_.data() + layout_.dense_offset, layout_.features()};
}

const embedding::TokenMatrix& CnnClassifier::matrix(const Representation& r) const {
  const auto* x = std::get_if<embedding::TokenMatrix>(&r);
  if (!x) throw InvalidArgument("CNN expects token-matrix inputs");
  if (x->dim != layout_.dim)
    throw InvalidArgument("token matrix width " + std::to_string(x->dim) +
                          " does not match the network's embedding dimension " +
                          std::to_string(layout_.dim));
  const std::size_t widest =
      *std::max_element(layout_.filter_sizes.begin(), layout_.filter_sizes.end());
  if (x->max_len < widest)
    throw InvalidArgument("token matrix shorter than the widest filter");
  if (x->rows.size() != x->max_len * x->dim)
    throw InvalidArgument("token matrix storage does not match its shape");
  return *x;
}

double CnnClassifier::forward(const embedding::TokenMatrix& x, Pooled& pooled,
                              const std::vector<double>* dropout_scale) const {
  const std::size_t F = layout_.filters;
  const std::size_t dim = layout_.dim;
  pooled.values.assign(layout_.features(), 0.0);
  pooled.argmax.assign(layout_.features(), -1);
  RowMatrix scores;
  for (std::size_t s = 0; s < layout_.filter_sizes.size(); ++s) {
    const std::size_t h = layout_.filter_sizes[s];
    const std::size_t positions = x.max_len - h + 1;
    // Windows starting past the last real token see only zero padding and
    // all score exactly the bias; one representative suffices.
    const std::size_t real = std::min(x.true_length, positions);
    const bool has_padding = real < positions;
    const double* bias = params_.data() + layout_.bias_offset[s];
    if (real > 0) {
      Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>> windows(
          x.rows.data(), static_cast<Eigen::Index>(real),
          static_cast<Eigen::Index>(h * dim), Eigen::OuterStride<>(static_cast<Eigen::Index>(dim)));
      Eigen::Map<const RowMatrix> weights(params_.data() + layout_.weight_offset[s],
                                          static_cast<Eigen::Index>(F),
                                          static_cast<Eigen::Index>(h * dim));
      scores.noalias() = windows * weights.transpose();
    }
    for (std::size_t f = 0; f < F; ++f) {
      double best = -INFINITY;
      long arg = -1;
      for (std::size_t p = 0; p < real; ++p) {
        const double z = scores(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(f)) + bias[f];
        if (z > best) {
          best = z;
          arg = static_cast<long>(p);
        }
      }
      if (has_padding && bias[f] > best) {
        best = bias[f];
        arg = -1;
      }
      const std::size_t j = s * F + f;
      pooled.values[j] = best > 0.0 ? best : 0.0;
      pooled.argmax[j] = arg;
    }
  }
  const double* w = params_.data() + layout_.dense_offset;
  double logit = params_[layout_.dense_bias_offset];
  for (std::size_t j = 0; j < pooled.values.size(); ++j) {
    const double d = dropout_scale ? pooled.values[j] * (*dropout_scale)[j] : pooled.values[j];
    logit += w[j] * d;
  }
  return logit;
}

void CnnClassifier::backward(const embedding::TokenMatrix& x, const Pooled& pooled,
                             const std::vector<double>* dropout_scale, double dlogit,
                             std::vector<double>& grad) const {
  const std::size_t F = layout_.filters;
  const std::size_t dim = layout_.dim;
  const double* w = params_.data() + layout_.dense_offset;
  for (std::size_t j = 0; j < pooled.values.size(); ++j) {
    const double scale = dropout_scale ? (*dropout_scale)[j] : 1.0;
    grad[layout_.dense_offset + j] += dlogit * pooled.values[j] * scale;
  }
  grad[layout_.dense_bias_offset] += dlogit;

  for (std::size_t s = 0; s < layout_.filter_sizes.size(); ++s) {
    const std::size_t width = layout_.filter_sizes[s] * dim;
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t j = s * F + f;
      if (pooled.values[j] <= 0.0) continue;  // ReLU inactive
      const double scale = dropout_scale ? (*dropout_scale)[j] : 1.0;
      const double g = dlogit * w[j] * scale;
      if (g == 0.0) continue;
      grad[layout_.bias_offset[s] + f] += g;
      if (pooled.argmax[j] < 0) continue;  // padding window: zero input
      const double* window = x.rows.data() + static_cast<std::size_t>(pooled.argmax[j]) * dim;
      double* gw = grad.data() + layout_.weight_offset[s] + f * width;
      for (std::size_t i = 0; i < width; ++i) gw[i] += g * window[i];
    }
  }
}

double CnnClassifier::loss(const FeatureRefs& batch, std::span<const Label> labels) const {
  if (!initialized()) throw NotTrained("CNN parameters are not initialised");
  if (batch.size() != labels.size() || batch.empty())
    throw InvalidArgument("batch and labels must be non-empty and of equal size");
  Pooled pooled;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double z = forward(matrix(batch[i]), pooled, nullptr);
    total += bce_from_logit(z, labels[i] == Label::Abnormal ? 1.0 : 0.0);
  }
  return total / static_cast<double>(batch.size());
}

CnnGradients cnn_gradients(const CnnClassifier& c, const FeatureRefs& batch,
                           std::span<const Label> labels) {
  if (!c.initialized()) throw NotTrained("CNN parameters are not initialised");
  if (batch.size() != labels.size() || batch.empty())
    throw InvalidArgument("batch and labels must be non-empty and of equal size");
  CnnGradients g{c.layout_, std::vector<double>(c.layout_.total, 0.0)};
  CnnClassifier::Pooled pooled;
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& x = c.matrix(batch[i]);
    const double z = c.forward(x, pooled, nullptr);
    const double y = labels[i] == Label::Abnormal ? 1.0 : 0.0;
    c.backward(x, pooled, nullptr, (sigmoid(z) - y) / n, g.values);
  }
  return g;
}

void CnnClassifier::run_epochs(const FeatureRefs& inputs, std::span<const Label> labels,
                               const TrainConfig& cfg) {
  for (std::size_t i = 0; i < inputs.size(); ++i) matrix(inputs[i]);
  const double rate = architecture().dropout;
  const double keep_scale = rate < 1.0 ? 1.0 / (1.0 - rate) : 0.0;
  const std::size_t batch = cfg.batch_size == 0 ? inputs.size() : cfg.batch_size;

  Rng rng(derive_seed(spec_.seed, 1000 + rounds_));
  ++rounds_;
  AdamState adam;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(layout_.total);
  std::vector<double> mask(layout_.features());
  Pooled pooled;

  summary_.epoch_loss.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double n = static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        for (auto& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
        const auto& x = std::get<embedding::TokenMatrix>(inputs[i]);
        const double z = forward(x, pooled, &mask);
        const double y = labels[i] == Label::Abnormal ? 1.0 : 0.0;
        const double p = sigmoid(z);
        epoch_loss += bce_from_logit(z, y);
        if ((p >= 0.5) == (y == 1.0)) ++correct;
        backward(x, pooled, &mask, (p - y) / n, grad);
      }
      adam_update(params_, grad, adam, cfg.learning_rate);
    }
    summary_.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    summary_.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
  }
  if (!summary_.epoch_loss.empty()) summary_.final_loss = summary_.epoch_loss.back();
}

void CnnClassifier::do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                           const TrainConfig& cfg) {
  const auto* first = std::get_if<embedding::TokenMatrix>(&inputs[0]);
  if (!first) throw InvalidArgument("CNN expects token-matrix inputs");
  initialize(first->dim);
  rounds_ = 0;
  run_epochs(inputs, labels, cfg);
}

void CnnClassifier::do_fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                                 const TrainConfig& cfg) {
  run_epochs(inputs, labels, cfg);
}

double CnnClassifier::do_predict(const Representation& input) const {
  Pooled pooled;
  return sigmoid(forward(matrix(input), pooled, nullptr));
}

nlohmann::json CnnClassifier::do_state() const {
  nlohmann::json conv = nlohmann::json::array();
  for (std::size_t s = 0; s < layout_.filter_sizes.size(); ++s) {
    const std::size_t width = layout_.filter_sizes[s] * layout_.dim;
    nlohmann::json rows = nlohmann::json::array();
    auto w = conv_weights(s);
    for (std::size_t f = 0; f < layout_.filters; ++f)
      rows.push_back(std::vector<double>(w.begin() + f * width, w.begin() + (f + 1) * width));
    auto b = conv_bias(s);
    conv.push_back({{"size", layout_.filter_sizes[s]},
                    {"weights", rows},
                    {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  auto dw = dense_weights();
  return {{"embedding_dim", layout_.dim},
          {"conv", conv},
          {"dense", {{"weights", std::vector<double>(dw.begin(), dw.end())},
                     {"bias", dense_bias()}}},
          {"rounds", rounds_}};
}

void CnnClassifier::do_load_state(const nlohmann::json& j) {
  const std::size_t dim = j.at("embedding_dim").get<std::size_t>();
  CnnLayout layout = CnnLayout::make(dim, architecture());
  std::vector<double> params(layout.total, 0.0);
  const auto& conv = j.at("conv");
  if (conv.size() != layout.filter_sizes.size())
    throw InvalidArgument("CNN state has the wrong number of filter sizes");
  for (std::size_t s = 0; s < conv.size(); ++s) {
    const std::size_t width = layout.filter_sizes[s] * dim;
    if (conv[s].at("size").get<std::size_t>() != layout.filter_sizes[s])
      throw InvalidArgument("CNN state filter size mismatch");
    const auto& rows = conv[s].at("weights");
    if (rows.size() != layout.filters) throw InvalidArgument("CNN state filter count mismatch");
    for (std::size_t f = 0; f < layout.filters; ++f) {
      auto row = rows[f].get<std::vector<double>>();
      if (row.size() != width) throw InvalidArgument("CNN state filter width mismatch");
      std::copy(row.begin(), row.end(), params.begin() + static_cast<long>(layout.weight_offset[s] + f * width));
    }
    auto bias = conv[s].at("bias").get<std::vector<double>>();
    if (bias.size() != layout.filters) throw InvalidArgument("CNN state bias size mismatch");
    std::copy(bias.begin(), bias.end(), params.begin() + static_cast<long>(layout.bias_offset[s]));
  }
  auto dw = j.at("dense").at("weights").get<std::vector<double>>();
  if (dw.size() != layout.features()) throw InvalidArgument("CNN state dense size mismatch");
  std::copy(dw.begin(), dw.end(), params.begin() + static_cast<long>(layout.dense_offset));
  params[layout.dense_bias_offset] = j.at("dense").at("bias").get<double>();
  for (double v : params)
    if (!std::isfinite(v)) throw InvalidArgument("CNN state has non-finite parameters");
  layout_ = std::move(layout);
  params_ = std::move(params);
  rounds_ = j.value("rounds", std::uint64_t{0});
}

}  // namespace sstl::models
