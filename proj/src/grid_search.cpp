#include "sstl/grid_search.hpp"

#include "sstl/error.hpp"
#include "sstl/eval.hpp"
#include "sstl/rng.hpp"

namespace sstl::models {

using nlohmann::json;

std::vector<ClassifierSpec> expand_grid(const ClassifierSpec& base, const Grid& grid) {
  if (grid.empty()) throw InvalidArgument("grid_search: empty grid");
  std::vector<std::pair<std::string, const std::vector<json>*>> axes;
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw InvalidArgument("grid_search: no values for \"" + key + "\"");
    axes.emplace_back(key, &values);
  }
  std::vector<ClassifierSpec> out;
  std::vector<std::size_t> pos(axes.size(), 0);
  for (;;) {
    json j = to_json(base);
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& [key, values] = axes[a];
      const json& v = (*values)[pos[a]];
      if (key == "learning_rate" || key == "batch_size" || key == "epochs")
        j["train"][key] = v;
      else
        j["hyperparameters"][key] = v;
    }
    out.push_back(spec_from_json(j, "/grid"));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < axes[a].second->size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
  }
}

GridSearchResult grid_search(const ClassifierSpec& base, const Grid& grid,
                             const corpus::Dataset& ds, std::size_t k, std::uint64_t seed,
                             const FeatureStore& features, std::size_t threads) {
  GridSearchResult result;
  for (const auto& spec : expand_grid(base, grid)) {
    const auto folds = eval::cross_validate(
        [&spec, &features](const corpus::Dataset& train, std::size_t, std::uint64_t fold_seed) {
          auto s = spec;
          s.seed = derive_seed(spec.seed, fold_seed);
          auto c = make_classifier(s);
          c->fit(features.refs(train), train.labels());
          return c;
        },
        features, ds, k, seed, threads);
    result.points.push_back({spec, folds.f1.mean});
    if (result.points.size() == 1 || folds.f1.mean > result.best_score) {
      result.best = spec;
      result.best_score = folds.f1.mean;
    }
  }
  return result;
}

}  // namespace sstl::models
