#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sstl/corpus.hpp"
#include "sstl/error.hpp"
#include "sstl/models.hpp"

namespace sstl::eval {

using corpus::Label;

/// Positive class is Abnormal.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> gold);
/// Ratios with a zero denominator are 0.
Metrics metrics_from_counts(const ConfusionCounts& c);

/// Abnormal iff p >= 0.5.
inline Label predicted_label(double p) { return p >= 0.5 ? Label::Abnormal : Label::Normal; }

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation (n - 1)
};

Summary summarize(std::span<const double> values);

struct FoldResults {
  std::vector<Metrics> folds;
  Summary precision, recall, f1, accuracy;

  static FoldResults from_folds(std::vector<Metrics> folds);
  std::vector<double> values(double Metrics::*field) const;
};

struct TTestResult {
  double t_statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
  bool significant_at_05 = false;
};

/// Paired two-tailed Student t-test on a - b. With zero spread in the
/// differences, p is 1 when their mean is 0 and 0 otherwise.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

/// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// Two-tailed p-value of Student's t with df degrees of freedom.
double student_t_two_tailed(double t, double df);

/// Error raised inside one fold, tagged with its index.
class FoldError : public Error {
 public:
  FoldError(std::size_t fold, const std::string& what)
      : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
  std::size_t fold() const { return fold_; }

 private:
  std::size_t fold_;
};

/// Trains a classifier on one fold's training split. fold_seed is
/// seed + fold index.
using TrainFn = std::function<std::unique_ptr<models::Classifier>(
    const corpus::Dataset& train, std::size_t fold, std::uint64_t fold_seed)>;

/// Stratified k-fold cross-validation. Folds may run on up to `threads`
/// workers; results are reduced in fold order and do not depend on the
/// thread count.
FoldResults cross_validate(const TrainFn& train, const models::FeatureStore& features,
                           const corpus::Dataset& ds, std::size_t k, std::uint64_t seed,
                           std::size_t threads = 1);

/// Metrics of a trained classifier on a labeled dataset.
Metrics evaluate(const models::Classifier& c, const models::FeatureStore& features,
                 const corpus::Dataset& ds);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown for the lowest failing index after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace sstl::eval
