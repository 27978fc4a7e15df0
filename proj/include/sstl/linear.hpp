#pragma once

#include <span>
#include <vector>

#include "sstl/models.hpp"

namespace sstl::models {

/// Shared storage for the three linear families: weights w and bias b over
/// standardised dense mean vectors. The per-feature centre and scale are
/// fitted on the first training set and kept by fine_tune.
class LinearModel : public Classifier {
 public:
  using Classifier::Classifier;

  std::span<const double> weights() const { return w_; }
  double bias() const { return b_; }
  std::span<const double> center() const { return center_; }
  std::span<const double> scale() const { return scale_; }
  /// Installs parameters directly and marks the model trained. Without an
  /// explicit centre and scale the inputs are used as given.
  void set_parameters(std::vector<double> w, double b);
  void set_parameters(std::vector<double> w, double b, std::vector<double> center,
                      std::vector<double> scale);

  double decision_value(const Representation& input) const;

  /// Mean L2-regularised log-loss, (1/n) sum softplus(z) - y z + (l2/2)|w|^2,
  /// and its gradient (weights first, bias last). Used by LR and SGD.
  double log_loss(const FeatureRefs& inputs, std::span<const Label> labels, double l2) const;
  std::vector<double> log_loss_gradient(const FeatureRefs& inputs,
                                        std::span<const Label> labels, double l2) const;

 protected:
  /// Zero weights and a scaler fitted to the inputs.
  void initialize(const FeatureRefs& inputs);
  double feature(const std::vector<double>& x, std::size_t d) const {
    return (x[d] - center_[d]) * scale_[d];
  }
  nlohmann::json linear_state() const;
  void load_linear_state(const nlohmann::json& j);

  std::vector<double> w_;
  double b_ = 0.0;
  std::vector<double> center_;
  std::vector<double> scale_;
};

/// Full-batch gradient descent on regularised log-loss (mini-batches when
/// train.batch_size is nonzero and smaller than the data).
class LogisticRegression : public LinearModel {
 public:
  explicit LogisticRegression(ClassifierSpec spec);
  bool supports_fine_tune() const override { return true; }
  std::unique_ptr<Classifier> clone() const override;

  double loss(const FeatureRefs& inputs, std::span<const Label> labels) const;
  std::vector<double> gradient(const FeatureRefs& inputs, std::span<const Label> labels) const;

 protected:
  void do_fit(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  void do_fine_tune(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  double do_predict(const Representation& input) const override;
  nlohmann::json do_state() const override { return linear_state(); }
  void do_load_state(const nlohmann::json& j) override { load_linear_state(j); }

 private:
  void descend(const FeatureRefs&, std::span<const Label>, const TrainConfig&);
  double l2() const;
  std::uint64_t rounds_ = 0;
};

/// Log-loss with a weight update after every sample.
class SgdClassifier : public LinearModel {
 public:
  explicit SgdClassifier(ClassifierSpec spec);
  bool supports_fine_tune() const override { return true; }
  std::unique_ptr<Classifier> clone() const override;

  double loss(const FeatureRefs& inputs, std::span<const Label> labels) const;
  std::vector<double> gradient(const FeatureRefs& inputs, std::span<const Label> labels) const;

 protected:
  void do_fit(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  void do_fine_tune(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  double do_predict(const Representation& input) const override;
  nlohmann::json do_state() const override;
  void do_load_state(const nlohmann::json& j) override;

 private:
  void run_epochs(const FeatureRefs&, std::span<const Label>, const TrainConfig&);
  double l2() const;
  std::uint64_t rounds_ = 0;
};

/// Linear hinge-loss SVM trained Pegasos-style; probabilities come from a
/// logistic link sigma(a f + c) on the decision value f, fitted on a held-out
/// calibration slice.
class LinearSvm : public LinearModel {
 public:
  explicit LinearSvm(ClassifierSpec spec);
  bool supports_fine_tune() const override { return true; }
  std::unique_ptr<Classifier> clone() const override;

  double link_slope() const { return link_a_; }
  double link_offset() const { return link_c_; }

 protected:
  void do_fit(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  void do_fine_tune(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  double do_predict(const Representation& input) const override;
  nlohmann::json do_state() const override;
  void do_load_state(const nlohmann::json& j) override;

 private:
  void train(const FeatureRefs&, std::span<const Label>, const TrainConfig&);
  const SvmParams& params() const;
  double link_a_ = 1.0;
  double link_c_ = 0.0;
  std::uint64_t steps_ = 0;
  std::uint64_t rounds_ = 0;
};

/// Fits sigma(a f + c) to labels by Newton's method with Platt's smoothed
/// targets. Returns {a, c}.
std::pair<double, double> fit_logistic_link(std::span<const double> decision_values,
                                            std::span<const Label> labels);

}  // namespace sstl::models
