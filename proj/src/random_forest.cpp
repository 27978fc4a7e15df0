#include "sstl/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sstl/error.hpp"
#include "sstl/rng.hpp"

namespace sstl::models {

double gini(double n_normal, double n_abnormal) {
  const double n = n_normal + n_abnormal;
  if (n <= 0) return 0.0;
  const double p = n_abnormal / n;
  return 2.0 * p * (1.0 - p);
}

namespace {

const std::vector<double>& dense(const Representation& r) {
  const auto* v = std::get_if<embedding::DocVector>(&r);
  if (!v) throw InvalidArgument("random forest expects mean-vector inputs");
  return v->values;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = INFINITY;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<const std::vector<double>*>& x, std::span<const Label> y,
              const RfParams& p, std::size_t dim, Rng& rng)
      : x_(x), y_(y), p_(p), dim_(dim), rng_(rng) {
    mtry_ = p.max_features == 0
                ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(dim))))
                : std::min(p.max_features, dim);
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    tree_.clear();
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples, std::size_t depth) {
    const int id = static_cast<int>(tree_.size());
    tree_.push_back({});
    double n_abn = 0;
    for (std::size_t i : samples) n_abn += y_[i] == Label::Abnormal ? 1 : 0;
    const double n_norm = static_cast<double>(samples.size()) - n_abn;
    tree_[id].label = n_abn > n_norm ? Label::Abnormal : Label::Normal;

    const bool pure = n_abn == 0 || n_norm == 0;
    const bool depth_done = p_.max_depth != 0 && depth >= p_.max_depth;
    if (pure || depth_done || samples.size() < 2 * p_.min_samples_leaf) return id;

    SplitChoice best = choose(samples);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : samples)
      ((*x_[i])[best.feature] <= best.threshold ? left : right).push_back(i);
    samples.clear();
    samples.shrink_to_fit();
    tree_[id].feature = best.feature;
    tree_[id].threshold = best.threshold;
    const int l = grow(std::move(left), depth + 1);
    tree_[id].left = l;
    const int r = grow(std::move(right), depth + 1);
    tree_[id].right = r;
    return id;
  }

  // Samples mtry candidate features; if none of them admits a split, keeps
  // drawing from the remaining features.
  SplitChoice choose(const std::vector<std::size_t>& samples) {
    std::vector<std::size_t> features(dim_);
    std::iota(features.begin(), features.end(), 0);
    rng_.shuffle(features);
    SplitChoice best;
    std::vector<std::pair<double, Label>> column(samples.size());
    double total_abn = 0;
    for (std::size_t i : samples) total_abn += y_[i] == Label::Abnormal ? 1 : 0;
    const double n = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < features.size(); ++k) {
      if (k >= mtry_ && best.feature >= 0) break;
      const std::size_t f = features[k];
      for (std::size_t s = 0; s < samples.size(); ++s)
        column[s] = {(*x_[samples[s]])[f], y_[samples[s]]};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_abn = 0;
      for (std::size_t s = 0; s + 1 < column.size(); ++s) {
        left_abn += column[s].second == Label::Abnormal ? 1 : 0;
        if (column[s].first == column[s + 1].first) continue;
        const double nl = static_cast<double>(s + 1);
        const double nr = n - nl;
        if (nl < static_cast<double>(p_.min_samples_leaf) ||
            nr < static_cast<double>(p_.min_samples_leaf))
          continue;
        const double imp = (nl * gini(nl - left_abn, left_abn) +
                            nr * gini(nr - (total_abn - left_abn), total_abn - left_abn)) / n;
        if (imp < best.impurity) {
          best.impurity = imp;
          best.feature = static_cast<int>(f);
          double mid = 0.5 * (column[s].first + column[s + 1].first);
          // Guard against the midpoint rounding onto the upper value.
          if (!(mid < column[s + 1].first)) mid = column[s].first;
          best.threshold = mid;
        }
      }
    }
    return best;
  }

  const std::vector<const std::vector<double>*>& x_;
  std::span<const Label> y_;
  const RfParams& p_;
  std::size_t dim_;
  Rng& rng_;
  std::size_t mtry_;
  DecisionTree tree_;
};

Label evaluate(const DecisionTree& tree, const std::vector<double>& x) {
  int node = 0;
  while (tree[node].feature >= 0)
    node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
  return tree[node].label;
}

}  // namespace

RandomForest::RandomForest(ClassifierSpec spec) : Classifier(std::move(spec)) {
  if (family() != Family::RF) throw InvalidArgument("RandomForest needs an RF spec");
}

std::unique_ptr<Classifier> RandomForest::clone() const {
  return std::make_unique<RandomForest>(*this);
}

void RandomForest::set_trees(std::vector<DecisionTree> trees) {
  if (trees.empty()) throw InvalidArgument("a forest needs at least one tree");
  for (const auto& t : trees) {
    if (t.empty()) throw InvalidArgument("empty decision tree");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& node = t[i];
      const int self = static_cast<int>(i);
      const int size = static_cast<int>(t.size());
      // Children must come after their parent, which rules out cycles.
      if (node.feature >= 0 &&
          (node.left <= self || node.right <= self || node.left >= size ||
           node.right >= size || !std::isfinite(node.threshold)))
        throw InvalidArgument("malformed decision tree node");
    }
  }
  max_feature_ = -1;
  for (const auto& t : trees)
    for (const auto& node : t) max_feature_ = std::max(max_feature_, node.feature);
  trees_ = std::move(trees);
  trained_ = true;
}

void RandomForest::do_fit(const FeatureRefs& inputs, std::span<const Label> labels,
                          const TrainConfig&) {
  const auto& p = std::get<RfParams>(spec_.hyperparameters);
  const std::size_t dim = dense(inputs[0]).size();
  std::vector<const std::vector<double>*> x(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    x[i] = &dense(inputs[i]);
    if (x[i]->size() != dim) throw InvalidArgument("inconsistent input dimensions");
  }
  std::vector<DecisionTree> trees;
  trees.reserve(p.n_trees);
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    Rng rng(derive_seed(spec_.seed, t));
    std::vector<std::size_t> samples(inputs.size());
    if (p.bootstrap) {
      for (auto& s : samples) s = rng.below(inputs.size());
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    TreeBuilder builder(x, labels, p, dim, rng);
    trees.push_back(builder.build(std::move(samples)));
  }
  set_trees(std::move(trees));
}

double RandomForest::do_predict(const Representation& input) const {
  const auto& x = dense(input);
  std::size_t votes = 0;
  if (max_feature_ >= 0 && static_cast<std::size_t>(max_feature_) >= x.size())
    throw InvalidArgument("input dimension does not match the forest");
  for (const auto& t : trees_) votes += evaluate(t, x) == Label::Abnormal ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::do_state() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, static_cast<int>(n.label)});
    trees.push_back(std::move(nodes));
  }
  return {{"trees", trees}};
}

void RandomForest::do_load_state(const nlohmann::json& j) {
  std::vector<DecisionTree> trees;
  for (const auto& t : j.at("trees")) {
    DecisionTree tree;
    for (const auto& n : t) {
      if (!n.is_array() || n.size() != 5) throw InvalidArgument("tree node must have 5 fields");
      TreeNode node;
      node.feature = n[0].get<int>();
      node.threshold = n[1].get<double>();
      node.left = n[2].get<int>();
      node.right = n[3].get<int>();
      const int label = n[4].get<int>();
      if (label != 0 && label != 1) throw InvalidArgument("tree leaf label must be 0 or 1");
      node.label = static_cast<Label>(label);
      tree.push_back(node);
    }
    trees.push_back(std::move(tree));
  }
  set_trees(std::move(trees));
}

}  // namespace sstl::models
