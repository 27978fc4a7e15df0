#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sstl/models.hpp"

namespace sstl::models {

/// Offsets of each parameter group inside the flat parameter vector:
/// per filter size s, weights (F x h_s*dim, row-major) then biases (F); after
/// all sizes, dense weights (F * #sizes) and the dense bias.
struct CnnLayout {
  std::size_t dim = 0;
  std::vector<std::size_t> filter_sizes;
  std::size_t filters = 0;
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;
  std::size_t dense_offset = 0;
  std::size_t dense_bias_offset = 0;
  std::size_t total = 0;

  static CnnLayout make(std::size_t dim, const CnnParams& arch);
  std::size_t features() const { return filters * filter_sizes.size(); }
};

/// Gradient record with the same layout as the network parameters.
struct CnnGradients {
  CnnLayout layout;
  std::vector<double> values;

  std::span<const double> conv_weights(std::size_t s) const;
  std::span<const double> conv_bias(std::size_t s) const;
  std::span<const double> dense_weights() const;
  double dense_bias() const { return values[layout.dense_bias_offset]; }
};

/// Convolutional text classifier over static token-embedding matrices:
/// one 1-d convolution per filter size, ReLU, max-over-time pooling,
/// dropout on the pooled features, and a single sigmoid output unit trained
/// with binary cross-entropy and Adam.
class CnnClassifier : public Classifier {
 public:
  explicit CnnClassifier(ClassifierSpec spec);
  bool supports_fine_tune() const override { return true; }
  std::unique_ptr<Classifier> clone() const override;

  const CnnParams& architecture() const;

  /// Glorot-uniform weights and zero biases for inputs of width dim.
  void initialize(std::size_t embedding_dim);
  bool initialized() const { return !params_.empty(); }
  const CnnLayout& layout() const { return layout_; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  std::span<const double> conv_weights(std::size_t s) const;
  std::span<const double> conv_bias(std::size_t s) const;
  std::span<const double> dense_weights() const;
  double dense_bias() const { return params_[layout_.dense_bias_offset]; }

  /// Mean binary cross-entropy over the batch, dropout disabled.
  double loss(const FeatureRefs& batch, std::span<const Label> labels) const;

 protected:
  void do_fit(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  void do_fine_tune(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  double do_predict(const Representation& input) const override;
  nlohmann::json do_state() const override;
  void do_load_state(const nlohmann::json& j) override;

 private:
  friend CnnGradients cnn_gradients(const CnnClassifier&, const FeatureRefs&,
                                     std::span<const Label>);

  struct Pooled {
    std::vector<double> values;  // post-ReLU max per feature
    std::vector<long> argmax;    // window start; -1 for an all-padding window
  };

  const embedding::TokenMatrix& matrix(const Representation& r) const;
  double forward(const embedding::TokenMatrix& x, Pooled& pooled,
                 const std::vector<double>* dropout_scale) const;
  /// Adds d(loss)/d(params) for one example into grad, given
  /// dlogit = d(loss)/d(logit).
  void backward(const embedding::TokenMatrix& x, const Pooled& pooled,
                const std::vector<double>* dropout_scale, double dlogit,
                std::vector<double>& grad) const;
  void run_epochs(const FeatureRefs& inputs, std::span<const Label> labels,
                  const TrainConfig& cfg);

  CnnLayout layout_;
  std::vector<double> params_;
  std::uint64_t rounds_ = 0;
};

/// Analytic gradient of the mean batch cross-entropy with dropout disabled.
CnnGradients cnn_gradients(const CnnClassifier& c, const FeatureRefs& batch,
                           std::span<const Label> labels);

}  // namespace sstl::models
