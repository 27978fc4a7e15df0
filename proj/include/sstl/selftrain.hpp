#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sstl/corpus.hpp"
#include "sstl/models.hpp"

namespace sstl::selftrain {

using corpus::Label;

enum class BalancePolicy { ConfidenceRanked, RandomUndersample };

std::string_view to_string(BalancePolicy p);
std::optional<BalancePolicy> parse_balance(std::string_view s);

struct SelfTrainConfig {
  double tau = 0.99;
  std::size_t max_iterations = 50;
  double validation_fraction = 0.2;
  BalancePolicy balance = BalancePolicy::ConfidenceRanked;
  /// Schedule of the initial from-scratch fit; unset means the spec's own.
  std::optional<models::TrainConfig> fit_cfg;
  models::TrainConfig fine_tune_cfg = models::default_fine_tune_config();
  std::uint64_t seed = 0;
  /// Workers used to score the pool.
  std::size_t threads = 1;

  void validate() const;
};

struct PseudoLabel {
  std::string id;
  Label label = Label::Normal;
  double confidence = 0.0;
};

struct PseudoLabeledSet {
  std::vector<PseudoLabel> items;

  std::array<std::size_t, 2> class_counts() const;
  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

/// Items whose confidence max(p, 1 - p) is strictly above tau, in input
/// order. The label is Abnormal iff p >= 0.5.
PseudoLabeledSet select_confident(std::span<const std::string> ids,
                                  std::span<const double> probs, double tau);
PseudoLabeledSet select_confident(const models::Classifier& c, const corpus::Dataset& pool,
                                  const models::FeatureStore& features, double tau,
                                  std::size_t threads = 1);

/// Undersamples the majority class down to the minority count. Empty when
/// either class is absent. Output keeps input order.
PseudoLabeledSet balance(const PseudoLabeledSet& g, BalancePolicy policy, std::uint64_t seed);

struct IterationLog {
  std::size_t index = 0;
  std::array<std::size_t, 2> selected{};  ///< per class, before balancing
  std::array<std::size_t, 2> balanced{};  ///< per class, after balancing
  double val_accuracy = 0.0;
  bool rolled_back = false;
  std::size_t labeled_size = 0;  ///< |labeled| after this iteration's update
  std::size_t pool_size = 0;     ///< |pool| after this iteration's update
  std::vector<PseudoLabel> added;

  nlohmann::ordered_json to_json() const;
};

enum class StopReason { PoolExhausted, NoConfident, NoImprovement, MaxIterations };
std::string_view to_string(StopReason r);

struct SelfTrainResult {
  std::unique_ptr<models::Classifier> model;
  std::vector<IterationLog> logs;
  StopReason stop = StopReason::PoolExhausted;
};

/// Self-training from an untrained classifier (fitted on the labeled set at
/// iteration 0) or a trained one (fine-tuned instead). The validation split
/// is cfg.validation_fraction of `labeled`, stratified, held out up front.
SelfTrainResult self_train(const models::Classifier& c0, const corpus::Dataset& labeled,
                           const corpus::Dataset& pool, const models::FeatureStore& features,
                           const SelfTrainConfig& cfg);

/// The loop itself with an explicit validation set. `labeled` may be empty
/// only when c0 is trained; iteration 0 then keeps c0 unchanged.
SelfTrainResult self_train_with_validation(const models::Classifier& c0,
                                           const corpus::Dataset& labeled,
                                           const corpus::Dataset& pool,
                                           const corpus::Dataset& validation,
                                           const models::FeatureStore& features,
                                           const SelfTrainConfig& cfg);

/// Model trained on the labeled source set, minus a stratified held-out
/// slice kept as the validation proxy when the target has no labels.
struct SourceModel {
  std::unique_ptr<models::Classifier> model;
  corpus::Dataset validation;
};

SourceModel train_source_model(const corpus::Dataset& source, const models::ClassifierSpec& spec,
                               const models::FeatureStore& features, const SelfTrainConfig& cfg);

SelfTrainResult self_train_transfer(const SourceModel& source, const corpus::Dataset& target_labeled,
                                    const corpus::Dataset& pool,
                                    const models::FeatureStore& features,
                                    const SelfTrainConfig& cfg);
SelfTrainResult self_train_transfer(const corpus::Dataset& source_labeled,
                                    const corpus::Dataset& target_labeled,
                                    const corpus::Dataset& pool, const models::ClassifierSpec& spec,
                                    const models::FeatureStore& features,
                                    const SelfTrainConfig& cfg);

}  // namespace sstl::selftrain
