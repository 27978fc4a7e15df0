#include "sstl/naive_bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sstl/error.hpp"

namespace sstl::models {

namespace {

const std::vector<double>& dense(const Representation& r) {
  const auto* v = std::get_if<embedding::DocVector>(&r);
  if (!v) throw InvalidArgument("naive Bayes expects mean-vector inputs");
  return v->values;
}

}  // namespace

GaussianNb::GaussianNb(ClassifierSpec spec) : Classifier(std::move(spec)) {
  if (family() != Family::NB) throw InvalidArgument("GaussianNb needs an NB spec");
}

std::unique_ptr<Classifier> GaussianNb::clone() const { return std::make_unique<GaussianNb>(*this); }

void GaussianNb::set_parameters(std::array<double, 2> priors,
                                std::array<std::vector<double>, 2> means,
                                std::array<std::vector<double>, 2> variances) {
  const std::size_t d = means[0].size();
  if (means[1].size() != d || variances[0].size() != d || variances[1].size() != d)
    throw InvalidArgument("naive Bayes parameter shapes disagree");
  for (std::size_t c = 0; c < 2; ++c) {
    if (!(priors[c] > 0.0 && priors[c] < 1.0)) throw InvalidArgument("priors must lie in (0, 1)");
    for (double v : variances[c])
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("variances must be positive");
    for (double m : means[c])
      if (!std::isfinite(m)) throw InvalidArgument("non-finite mean");
  }
  priors_ = priors;
  means_ = std::move(means);
  vars_ = std::move(variances);
  trained_ = true;
}

void GaussianNb::do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                        const TrainConfig&) {
  const std::size_t d = dense(inputs[0]).size();
  std::array<double, 2> count{0, 0};
  std::array<std::vector<double>, 2> mean{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  std::array<std::vector<double>, 2> var = mean;
  std::vector<double> all_mean(d, 0.0), all_var(d, 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& x = dense(inputs[i]);
    if (x.size() != d) throw InvalidArgument("inconsistent input dimensions");
    const std::size_t c = corpus::index_of(labels[i]);
    count[c] += 1;
    for (std::size_t k = 0; k < d; ++k) {
      mean[c][k] += x[k];
      all_mean[k] += x[k];
    }
  }
  const double n = static_cast<double>(inputs.size());
  for (std::size_t c = 0; c < 2; ++c)
    for (auto& m : mean[c]) m /= count[c];
  for (auto& m : all_mean) m /= n;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& x = dense(inputs[i]);
    const std::size_t c = corpus::index_of(labels[i]);
    for (std::size_t k = 0; k < d; ++k) {
      var[c][k] += (x[k] - mean[c][k]) * (x[k] - mean[c][k]);
      all_var[k] += (x[k] - all_mean[k]) * (x[k] - all_mean[k]);
    }
  }
  double max_var = 0.0;
  for (auto& v : all_var) max_var = std::max(max_var, v / n);
  double epsilon = std::get<NbParams>(spec_.hyperparameters).var_smoothing * max_var;
  if (!(epsilon > 0.0)) epsilon = 1e-300;  // every feature constant
  for (std::size_t c = 0; c < 2; ++c)
    for (auto& v : var[c]) v = v / count[c] + epsilon;
  set_parameters({count[0] / n, count[1] / n}, std::move(mean), std::move(var));
}

double GaussianNb::do_predict(const Representation& input) const {
  const auto& x = dense(input);
  if (x.size() != means_[0].size())
    throw InvalidArgument("input dimension does not match the model");
  std::array<double, 2> joint{};
  for (std::size_t c = 0; c < 2; ++c) {
    double s = std::log(priors_[c]);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double diff = x[k] - means_[c][k];
      s -= 0.5 * std::log(2.0 * std::numbers::pi * vars_[c][k]) + diff * diff / (2.0 * vars_[c][k]);
    }
    joint[c] = s;
  }
  const double z = joint[1] - joint[0];
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

nlohmann::json GaussianNb::do_state() const {
  return {{"priors", priors_}, {"means", means_}, {"variances", vars_}};
}

void GaussianNb::do_load_state(const nlohmann::json& j) {
  set_parameters(j.at("priors").get<std::array<double, 2>>(),
                 j.at("means").get<std::array<std::vector<double>, 2>>(),
                 j.at("variances").get<std::array<std::vector<double>, 2>>());
}

}  // namespace sstl::models
