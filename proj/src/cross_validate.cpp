#include <atomic>
#include <exception>
#include <thread>

#include "sstl/eval.hpp"

namespace sstl::eval {

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto work = [&] {
      for (std::size_t i; !failed && (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
          failed = true;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Metrics evaluate(const models::Classifier& c, const models::FeatureStore& features,
                 const corpus::Dataset& ds) {
  const auto probs = c.predict_proba(features.refs(ds));
  std::vector<Label> pred(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = predicted_label(probs[i]);
  return metrics_from_counts(confusion(pred, ds.labels()));
}

FoldResults cross_validate(const TrainFn& train, const models::FeatureStore& features,
                           const corpus::Dataset& ds, std::size_t k, std::uint64_t seed,
                           std::size_t threads) {
  const auto folds = corpus::stratified_kfold(ds, k, seed);
  std::vector<Metrics> metrics(k);
  parallel_for(k, threads, [&](std::size_t f) {
    try {
      auto model = train(folds[f].train, f, seed + f);
      if (!model || !model->trained()) throw Error("training closure returned no trained model");
      metrics[f] = evaluate(*model, features, folds[f].test);
    } catch (const FoldError&) {
      throw;
    } catch (const std::exception& e) {
      throw FoldError(f, e.what());
    }
  });
  return FoldResults::from_folds(std::move(metrics));
}

}  // namespace sstl::eval
