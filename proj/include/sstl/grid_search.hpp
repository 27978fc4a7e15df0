#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sstl/corpus.hpp"
#include "sstl/models.hpp"

namespace sstl::models {

/// Hyperparameter name -> candidate values. Names are either schedule keys
/// (learning_rate, batch_size, epochs) or keys of the family's
/// hyperparameter record.
using Grid = std::map<std::string, std::vector<nlohmann::json>>;

struct GridPoint {
  ClassifierSpec spec;
  double score = 0.0;  ///< mean fold F1
};

struct GridSearchResult {
  ClassifierSpec best;
  double best_score = 0.0;
  std::vector<GridPoint> points;  ///< in iteration order
};

/// Specs of the Cartesian product in iteration order: keys sorted, values in
/// listed order, last key varying fastest.
std::vector<ClassifierSpec> expand_grid(const ClassifierSpec& base, const Grid& grid);

/// Exhaustive search scored by stratified k-fold mean F1. Ties keep the
/// earliest point.
GridSearchResult grid_search(const ClassifierSpec& base, const Grid& grid,
                             const corpus::Dataset& ds, std::size_t k, std::uint64_t seed,
                             const FeatureStore& features, std::size_t threads = 1);

}  // namespace sstl::models
