#pragma once

#include <array>
#include <vector>

#include "sstl/models.hpp"

namespace sstl::models {

/// Gaussian naive Bayes over mean vectors. Variances get
/// var_smoothing * (largest feature variance) added.
class GaussianNb : public Classifier {
 public:
  explicit GaussianNb(ClassifierSpec spec);
  bool supports_fine_tune() const override { return false; }
  std::unique_ptr<Classifier> clone() const override;

  /// Installs class priors, means and (already smoothed) variances.
  void set_parameters(std::array<double, 2> priors,
                      std::array<std::vector<double>, 2> means,
                      std::array<std::vector<double>, 2> variances);

 protected:
  void do_fit(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  double do_predict(const Representation& input) const override;
  nlohmann::json do_state() const override;
  void do_load_state(const nlohmann::json& j) override;

 private:
  std::array<double, 2> priors_{0.5, 0.5};
  std::array<std::vector<double>, 2> means_;
  std::array<std::vector<double>, 2> vars_;
};

}  // namespace sstl::models
