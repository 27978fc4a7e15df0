#pragma once

#include <cstdint>
#include <vector>

#include "sstl/models.hpp"

namespace sstl::models {

/// CART tree node in a flat array. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Label label = Label::Normal;
};

using DecisionTree = std::vector<TreeNode>;

/// Bagged Gini trees with sqrt(d) candidate features per split. The
/// probability is the fraction of trees voting Abnormal.
class RandomForest : public Classifier {
 public:
  explicit RandomForest(ClassifierSpec spec);
  bool supports_fine_tune() const override { return false; }
  std::unique_ptr<Classifier> clone() const override;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  void set_trees(std::vector<DecisionTree> trees);

 protected:
  void do_fit(const FeatureRefs&, std::span<const Label>, const TrainConfig&) override;
  double do_predict(const Representation& input) const override;
  nlohmann::json do_state() const override;
  void do_load_state(const nlohmann::json& j) override;

 private:
  std::vector<DecisionTree> trees_;
  int max_feature_ = -1;
};

/// Gini impurity of a two-class node with the given counts.
double gini(double n_normal, double n_abnormal);

}  // namespace sstl::models
