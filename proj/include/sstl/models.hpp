#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sstl/corpus.hpp"
#include "sstl/embedding.hpp"

namespace sstl::models {

using corpus::Label;

enum class Family { SVM, SGD, NB, RF, LR, CNN };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view s);

/// Optimisation schedule. batch_size 0 means full batch. Adam's beta1, beta2
/// and epsilon are fixed at 0.9, 0.999, 1e-8.
struct TrainConfig {
  double learning_rate = 0.0005;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;

  void validate() const;
};

TrainConfig default_train_config(Family f);
/// Shorter schedule used when continuing from trained weights.
TrainConfig default_fine_tune_config();

struct LrParams {
  double l2 = 1e-4;
};
struct SgdParams {
  double l2 = 1e-4;
};
struct SvmParams {
  double lambda = 1e-4;
  /// Held-out share of the training set used to fit the logistic link. Zero
  /// calibrates on the training decision values.
  double calibration_fraction = 0.2;
};
struct NbParams {
  double var_smoothing = 1e-9;
};
struct RfParams {
  std::size_t n_trees = 100;
  std::size_t max_features = 0;  ///< 0: floor(sqrt(d))
  std::size_t max_depth = 0;     ///< 0: unlimited
  std::size_t min_samples_leaf = 1;
  bool bootstrap = true;
};
struct CnnParams {
  std::vector<std::size_t> filter_sizes{10, 15};
  std::size_t filters_per_size = 400;
  double dropout = 0.7;
};

using Hyperparameters =
    std::variant<SvmParams, SgdParams, NbParams, RfParams, LrParams, CnnParams>;

struct ClassifierSpec {
  Family family = Family::CNN;
  Hyperparameters hyperparameters = CnnParams{};
  TrainConfig train{};
  std::uint64_t seed = 0;

  void validate() const;
};

ClassifierSpec default_spec(Family f, std::uint64_t seed = 0);

nlohmann::json to_json(const ClassifierSpec& spec);
/// Strict: unknown keys and out-of-range values raise SchemaError naming the
/// JSON path (prefixed with `path`).
ClassifierSpec spec_from_json(const nlohmann::json& j, const std::string& path = "");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path,
                                   TrainConfig def);

// ---------------------------------------------------------------------------
// Inputs

enum class InputKind { MeanVector, TokenMatrix };
InputKind input_kind(Family f);

using Representation = std::variant<embedding::DocVector, embedding::TokenMatrix>;

/// Non-owning ordered list of representations.
class FeatureRefs {
 public:
  FeatureRefs() = default;
  explicit FeatureRefs(std::span<const Representation> reps);

  void push_back(const Representation& r) { items_.push_back(&r); }
  void reserve(std::size_t n) { items_.reserve(n); }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Representation& operator[](std::size_t i) const { return *items_[i]; }

 private:
  std::vector<const Representation*> items_;
};

/// Representations of a fixed document collection, looked up by document id.
/// Immutable after construction and safe to share between threads.
class FeatureStore {
 public:
  FeatureStore() = default;

  /// Mean vectors or token matrices for every document of every dataset.
  /// max_len is only used for token matrices.
  static FeatureStore build(std::span<const corpus::Dataset* const> datasets,
                            const embedding::EmbeddingModel& emb, InputKind kind,
                            std::size_t max_len);

  void add(const std::string& id, Representation rep);
  const Representation& at(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  std::size_t size() const { return reps_.size(); }

  FeatureRefs refs(const corpus::Dataset& ds) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::unique_ptr<Representation>> reps_;
};

// ---------------------------------------------------------------------------
// Classifier contract

struct TrainingSummary {
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  double accuracy = 0.0;
};

/// Probabilistic binary classifier. predict_proba returns P(Abnormal).
/// Trained instances are safe for concurrent prediction.
class Classifier {
 public:
  explicit Classifier(ClassifierSpec spec);
  virtual ~Classifier() = default;

  const ClassifierSpec& spec() const { return spec_; }
  Family family() const { return spec_.family; }
  bool trained() const { return trained_; }
  virtual bool supports_fine_tune() const = 0;

  /// Trains from scratch with spec().train, or with an explicit schedule.
  void fit(const FeatureRefs& inputs, std::span<const Label> labels);
  void fit(const FeatureRefs& inputs, std::span<const Label> labels,
           const TrainConfig& cfg);

  /// Continues training from the current weights with fresh optimiser state.
  void fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                 const TrainConfig& cfg);

  double predict_proba(const Representation& input) const;
  std::vector<double> predict_proba(const FeatureRefs& inputs) const;

  const TrainingSummary& training_summary() const { return summary_; }

  virtual std::unique_ptr<Classifier> clone() const = 0;

  /// Learned parameters as JSON (nested numeric lists).
  nlohmann::json state() const;
  void load_state(const nlohmann::json& state);

 protected:
  virtual void do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                      const TrainConfig& cfg) = 0;
  virtual void do_fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                            const TrainConfig& cfg);
  virtual double do_predict(const Representation& input) const = 0;
  virtual nlohmann::json do_state() const = 0;
  virtual void do_load_state(const nlohmann::json& state) = 0;

  void check_inputs(const FeatureRefs& inputs, std::span<const Label> labels) const;

  ClassifierSpec spec_;
  bool trained_ = false;
  TrainingSummary summary_;
};

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec);

/// {"format_version": 1, "spec": ..., "state": ...}
nlohmann::json model_to_json(const Classifier& c);
std::unique_ptr<Classifier> model_from_json(const nlohmann::json& j);
void save_model(const Classifier& c, const std::filesystem::path& path);
std::unique_ptr<Classifier> load_model(const std::filesystem::path& path);

/// Rounds to the given number of significant digits (model persistence).
double round_significant(double x, int digits);

}  // namespace sstl::models
