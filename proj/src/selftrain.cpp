#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "sstl/error.hpp"
#include "sstl/eval.hpp"
#include "sstl/rng.hpp"
#include "sstl/selftrain.hpp"

namespace sstl::selftrain {

using models::Classifier;
using models::FeatureRefs;
using models::FeatureStore;

std::string_view to_string(BalancePolicy p) {
  return p == BalancePolicy::ConfidenceRanked ? "confidence_ranked" : "random_undersample";
}

std::optional<BalancePolicy> parse_balance(std::string_view s) {
  if (s == "confidence_ranked") return BalancePolicy::ConfidenceRanked;
  if (s == "random_undersample") return BalancePolicy::RandomUndersample;
  return std::nullopt;
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::PoolExhausted: return "pool_exhausted";
    case StopReason::NoConfident: return "no_confident";
    case StopReason::NoImprovement: return "no_improvement";
    case StopReason::MaxIterations: return "max_iterations";
  }
  return "?";
}

void SelfTrainConfig::validate() const {
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in [0, 1)");
  if (max_iterations == 0) throw InvalidArgument("max_iterations must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw InvalidArgument("validation_fraction must lie in (0, 1)");
  if (fit_cfg) fit_cfg->validate();
  fine_tune_cfg.validate();
}

std::array<std::size_t, 2> PseudoLabeledSet::class_counts() const {
  std::array<std::size_t, 2> c{0, 0};
  for (const auto& it : items) ++c[corpus::index_of(it.label)];
  return c;
}

PseudoLabeledSet select_confident(std::span<const std::string> ids,
                                  std::span<const double> probs, double tau) {
  if (ids.size() != probs.size())
    throw InvalidArgument("select_confident: ids and probabilities differ in length");
  PseudoLabeledSet out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double p = probs[i];
    const double conf = std::max(p, 1.0 - p);
    if (conf > tau) out.items.push_back({ids[i], eval::predicted_label(p), conf});
  }
  return out;
}

namespace {

std::vector<double> score(const Classifier& c, const FeatureRefs& refs, std::size_t threads) {
  std::vector<double> probs(refs.size());
  constexpr std::size_t chunk = 256;
  const std::size_t chunks = (refs.size() + chunk - 1) / chunk;
  eval::parallel_for(chunks, threads, [&](std::size_t b) {
    const std::size_t end = std::min(refs.size(), (b + 1) * chunk);
    for (std::size_t i = b * chunk; i < end; ++i) probs[i] = c.predict_proba(refs[i]);
  });
  return probs;
}

}  // namespace

PseudoLabeledSet select_confident(const Classifier& c, const corpus::Dataset& pool,
                                  const FeatureStore& features, double tau,
                                  std::size_t threads) {
  std::vector<std::string> ids;
  ids.reserve(pool.size());
  for (const auto& d : pool.documents()) ids.push_back(d.id);
  const auto probs = score(c, features.refs(pool), threads);
  return select_confident(ids, probs, tau);
}

PseudoLabeledSet balance(const PseudoLabeledSet& g, BalancePolicy policy, std::uint64_t seed) {
  const auto counts = g.class_counts();
  PseudoLabeledSet out;
  if (counts[0] == 0 || counts[1] == 0) return out;
  const std::size_t keep = std::min(counts[0], counts[1]);
  const std::size_t major = counts[0] > counts[1] ? 0 : 1;

  std::vector<std::size_t> majority;
  for (std::size_t i = 0; i < g.items.size(); ++i)
    if (corpus::index_of(g.items[i].label) == major) majority.push_back(i);

  if (policy == BalancePolicy::ConfidenceRanked) {
    std::stable_sort(majority.begin(), majority.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = g.items[a];
      const auto& y = g.items[b];
      if (x.confidence != y.confidence) return x.confidence > y.confidence;
      return x.id < y.id;
    });
  } else {
    Rng rng(seed);
    rng.shuffle(majority);
  }
  std::vector<bool> chosen(g.items.size(), false);
  for (std::size_t j = 0; j < keep; ++j) chosen[majority[j]] = true;
  for (std::size_t i = 0; i < g.items.size(); ++i)
    if (corpus::index_of(g.items[i].label) != major || chosen[i]) out.items.push_back(g.items[i]);
  return out;
}

nlohmann::ordered_json IterationLog::to_json() const {
  auto per_class = [](const std::array<std::size_t, 2>& c) {
    return nlohmann::ordered_json{{"normal", c[0]}, {"abnormal", c[1]}};
  };
  nlohmann::ordered_json j;
  j["i"] = index;
  j["selected"] = per_class(selected);
  j["balanced_per_class"] = per_class(balanced);
  j["val_accuracy"] = val_accuracy;
  j["rolled_back"] = rolled_back;
  j["labeled_size"] = labeled_size;
  j["pool_size"] = pool_size;
  return j;
}

namespace {

double accuracy(const Classifier& c, const FeatureStore& features, const corpus::Dataset& val) {
  if (val.empty()) return 0.0;
  return eval::evaluate(c, features, val).accuracy;
}

}  // namespace

SelfTrainResult self_train_with_validation(const Classifier& c0, const corpus::Dataset& labeled,
                                           const corpus::Dataset& pool,
                                           const corpus::Dataset& validation,
                                           const FeatureStore& features,
                                           const SelfTrainConfig& cfg) {
  cfg.validate();
  if (!labeled.is_labeled()) throw InvalidArgument("self_train: labeled set carries no labels");
  if (!pool.is_unlabeled() && !pool.empty())
    throw InvalidArgument("self_train: pool must be unlabeled");
  if (labeled.empty() && !c0.trained())
    throw InvalidArgument("self_train: an untrained classifier needs labeled data");

  // Working sets: labeled as (representation, label), pool as positions.
  FeatureRefs lab_x = features.refs(labeled);
  std::vector<Label> lab_y = labeled.labels();
  {
    std::unordered_set<std::string> seen;
    for (const auto& d : labeled.documents()) seen.insert(d.id);
    for (const auto& d : pool.documents())
      if (seen.count(d.id)) throw InvalidArgument("self_train: document " + d.id + " is in both the labeled set and the pool");
  }
  std::vector<std::size_t> remaining(pool.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  SelfTrainResult result;
  std::unique_ptr<Classifier> model = c0.clone();
  if (!lab_x.empty()) {
    if (model->trained())
      model->fine_tune(lab_x, lab_y, cfg.fine_tune_cfg);
    else
      model->fit(lab_x, lab_y, cfg.fit_cfg ? *cfg.fit_cfg : model->spec().train);
  }
  double best_acc = accuracy(*model, features, validation);
  IterationLog first;
  first.val_accuracy = best_acc;
  first.labeled_size = lab_x.size();
  first.pool_size = remaining.size();
  result.logs.push_back(first);

  for (std::size_t i = 1;; ++i) {
    if (remaining.empty()) {
      result.stop = StopReason::PoolExhausted;
      break;
    }
    if (i >= cfg.max_iterations) {
      result.stop = StopReason::MaxIterations;
      break;
    }
    FeatureRefs pool_x;
    std::vector<std::string> pool_ids;
    pool_x.reserve(remaining.size());
    pool_ids.reserve(remaining.size());
    for (std::size_t r : remaining) {
      pool_ids.push_back(pool[r].id);
      pool_x.push_back(features.at(pool[r].id));
    }
    const auto probs = score(*model, pool_x, cfg.threads);
    const PseudoLabeledSet selected = select_confident(pool_ids, probs, cfg.tau);
    const PseudoLabeledSet gamma = balance(selected, cfg.balance, derive_seed(cfg.seed, i));
    if (gamma.empty()) {
      result.stop = StopReason::NoConfident;
      break;
    }

    std::unordered_set<std::string_view> taken;
    for (const auto& item : gamma.items) {
      taken.insert(item.id);
      lab_x.push_back(features.at(item.id));
      lab_y.push_back(item.label);
    }
    std::erase_if(remaining, [&](std::size_t r) { return taken.count(pool[r].id) > 0; });

    std::unique_ptr<Classifier> candidate = model->clone();
    candidate->fine_tune(lab_x, lab_y, cfg.fine_tune_cfg);
    const double acc = accuracy(*candidate, features, validation);

    IterationLog log;
    log.index = i;
    log.selected = selected.class_counts();
    log.balanced = gamma.class_counts();
    log.val_accuracy = acc;
    log.labeled_size = lab_x.size();
    log.pool_size = remaining.size();
    log.added = gamma.items;
    if (acc > best_acc) {
      model = std::move(candidate);
      best_acc = acc;
      result.logs.push_back(std::move(log));
    } else {
      log.rolled_back = true;
      result.logs.push_back(std::move(log));
      result.stop = StopReason::NoImprovement;
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

SelfTrainResult self_train(const Classifier& c0, const corpus::Dataset& labeled,
                           const corpus::Dataset& pool, const FeatureStore& features,
                           const SelfTrainConfig& cfg) {
  cfg.validate();
  const auto counts = labeled.class_counts();
  if (!labeled.is_labeled() || counts[0] == 0 || counts[1] == 0)
    throw InvalidArgument("self_train: the labeled set must contain both classes");
  auto split = corpus::stratified_split(labeled, cfg.validation_fraction, derive_seed(cfg.seed, 101));
  return self_train_with_validation(c0, split.rest, pool, split.selected, features, cfg);
}

SourceModel train_source_model(const corpus::Dataset& source, const models::ClassifierSpec& spec,
                               const FeatureStore& features, const SelfTrainConfig& cfg) {
  cfg.validate();
  const auto counts = source.class_counts();
  if (!source.is_labeled() || counts[0] == 0 || counts[1] == 0)
    throw InvalidArgument("transfer: the source set must contain both classes");
  auto model = models::make_classifier(spec);
  if (!model->supports_fine_tune())
    throw UnsupportedOperation("transfer needs a family that supports fine-tuning, got " +
                               std::string(models::to_string(spec.family)));
  auto split = corpus::stratified_split(source, cfg.validation_fraction, derive_seed(cfg.seed, 202));
  model->fit(features.refs(split.rest), split.rest.labels(),
             cfg.fit_cfg ? *cfg.fit_cfg : spec.train);
  return {std::move(model), std::move(split.selected)};
}

SelfTrainResult self_train_transfer(const SourceModel& source,
                                    const corpus::Dataset& target_labeled,
                                    const corpus::Dataset& pool, const FeatureStore& features,
                                    const SelfTrainConfig& cfg) {
  cfg.validate();
  if (!source.model || !source.model->trained())
    throw NotTrained("transfer: the source model is not trained");
  if (!source.model->supports_fine_tune())
    throw UnsupportedOperation("transfer needs a family that supports fine-tuning");
  if (target_labeled.empty())
    return self_train_with_validation(*source.model, target_labeled, pool, source.validation,
                                      features, cfg);
  if (!target_labeled.is_labeled())
    throw InvalidArgument("transfer: target labeled set carries no labels");
  auto split =
      corpus::stratified_split(target_labeled, cfg.validation_fraction, derive_seed(cfg.seed, 101));
  return self_train_with_validation(*source.model, split.rest, pool, split.selected, features, cfg);
}

SelfTrainResult self_train_transfer(const corpus::Dataset& source_labeled,
                                    const corpus::Dataset& target_labeled,
                                    const corpus::Dataset& pool,
                                    const models::ClassifierSpec& spec,
                                    const FeatureStore& features, const SelfTrainConfig& cfg) {
  const SourceModel source = train_source_model(source_labeled, spec, features, cfg);
  return self_train_transfer(source, target_labeled, pool, features, cfg);
}

}  // namespace sstl::selftrain
