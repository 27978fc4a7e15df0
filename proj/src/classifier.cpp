#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "sstl/cnn.hpp"
#include "sstl/error.hpp"
#include "sstl/json_reader.hpp"
#include "sstl/linear.hpp"
#include "sstl/models.hpp"
#include "sstl/naive_bayes.hpp"
#include "sstl/random_forest.hpp"

namespace sstl::models {

using nlohmann::json;

std::string_view to_string(Family f) {
  switch (f) {
    case Family::SVM: return "svm";
    case Family::SGD: return "sgd";
    case Family::NB: return "nb";
    case Family::RF: return "rf";
    case Family::LR: return "lr";
    case Family::CNN: return "cnn";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view s) {
  for (Family f : {Family::SVM, Family::SGD, Family::NB, Family::RF, Family::LR, Family::CNN})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgument("learning_rate must be finite and >= 0");
}

TrainConfig default_train_config(Family f) {
  switch (f) {
    case Family::CNN: return {0.0005, 16, 10};
    case Family::LR: return {0.5, 0, 300};
    case Family::SGD: return {0.01, 1, 20};
    case Family::SVM: return {0.0, 1, 20};  // Pegasos sets its own step size
    case Family::NB:
    case Family::RF: return {0.0, 0, 1};  // closed-form / greedy, no schedule
  }
  return {};
}

TrainConfig default_fine_tune_config() { return {0.0005, 16, 5}; }

namespace {

Hyperparameters default_hyperparameters(Family f) {
  switch (f) {
    case Family::SVM: return SvmParams{};
    case Family::SGD: return SgdParams{};
    case Family::NB: return NbParams{};
    case Family::RF: return RfParams{};
    case Family::LR: return LrParams{};
    case Family::CNN: return CnnParams{};
  }
  return CnnParams{};
}

json hyper_to_json(const Hyperparameters& h) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LrParams>) return {{"l2", p.l2}};
        else if constexpr (std::is_same_v<T, SgdParams>) return {{"l2", p.l2}};
        else if constexpr (std::is_same_v<T, SvmParams>)
          return {{"lambda", p.lambda}, {"calibration_fraction", p.calibration_fraction}};
        else if constexpr (std::is_same_v<T, NbParams>) return {{"var_smoothing", p.var_smoothing}};
        else if constexpr (std::is_same_v<T, RfParams>)
          return {{"n_trees", p.n_trees},
                  {"max_features", p.max_features},
                  {"max_depth", p.max_depth},
                  {"min_samples_leaf", p.min_samples_leaf},
                  {"bootstrap", p.bootstrap}};
        else
          return {{"filter_sizes", p.filter_sizes},
                  {"filters_per_size", p.filters_per_size},
                  {"dropout", p.dropout}};
      },
      h);
}

Hyperparameters hyper_from_json(Family f, const json& j, const std::string& path) {
  ObjectReader r(j, path);
  Hyperparameters out;
  switch (f) {
    case Family::LR: out = LrParams{r.number("l2", 1e-4, 0.0, 1e6)}; break;
    case Family::SGD: out = SgdParams{r.number("l2", 1e-4, 0.0, 1e6)}; break;
    case Family::SVM: {
      SvmParams p;
      p.lambda = r.number("lambda", p.lambda, 0.0, 1e6, true);
      p.calibration_fraction = r.number("calibration_fraction", p.calibration_fraction, 0.0, 1.0, false, true);
      out = p;
      break;
    }
    case Family::NB: out = NbParams{r.number("var_smoothing", 1e-9, 0.0, 1.0)}; break;
    case Family::RF: {
      RfParams p;
      p.n_trees = r.count("n_trees", p.n_trees, 1);
      p.max_features = r.count("max_features", p.max_features);
      p.max_depth = r.count("max_depth", p.max_depth);
      p.min_samples_leaf = r.count("min_samples_leaf", p.min_samples_leaf, 1);
      p.bootstrap = r.boolean("bootstrap", p.bootstrap);
      out = p;
      break;
    }
    case Family::CNN: {
      CnnParams p;
      if (const json* fs = r.child("filter_sizes")) {
        if (!fs->is_array() || fs->empty())
          throw SchemaError(r.path_of("filter_sizes"), "expected a non-empty array of sizes");
        p.filter_sizes.clear();
        for (std::size_t i = 0; i < fs->size(); ++i) {
          const json& v = (*fs)[i];
          if (!v.is_number_unsigned() || v.get<std::size_t>() == 0 ||
              v.get<std::size_t>() > embedding::kMinTokenMatrixLength)
            throw SchemaError(r.path_of("filter_sizes") + "/" + std::to_string(i),
                              "filter size must be an integer in [1, 15]");
          p.filter_sizes.push_back(v.get<std::size_t>());
        }
      }
      p.filters_per_size = r.count("filters_per_size", p.filters_per_size, 1);
      p.dropout = r.number("dropout", p.dropout, 0.0, 1.0, false, true);
      out = p;
      break;
    }
  }
  r.finish();
  return out;
}

}  // namespace

void ClassifierSpec::validate() const {
  // Round-trips through the strict reader, which carries all range checks.
  spec_from_json(to_json(*this));
}

ClassifierSpec default_spec(Family f, std::uint64_t seed) {
  return {f, default_hyperparameters(f), default_train_config(f), seed};
}

json to_json(const ClassifierSpec& spec) {
  return {{"family", std::string(to_string(spec.family))},
          {"hyperparameters", hyper_to_json(spec.hyperparameters)},
          {"train",
           {{"learning_rate", spec.train.learning_rate},
            {"batch_size", spec.train.batch_size},
            {"epochs", spec.train.epochs}}},
          {"seed", spec.seed}};
}

TrainConfig train_config_from_json(const json& j, const std::string& path, TrainConfig def) {
  ObjectReader r(j, path);
  TrainConfig t = def;
  t.learning_rate = r.number("learning_rate", def.learning_rate, 0.0, 1e6);
  t.batch_size = r.count("batch_size", def.batch_size);
  t.epochs = r.count("epochs", def.epochs);
  r.finish();
  return t;
}

ClassifierSpec spec_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string fam = r.string("family", "cnn");
  auto family = parse_family(fam);
  if (!family)
    throw SchemaError(r.path_of("family"),
                      "unknown family \"" + fam + "\" (expected svm, sgd, nb, rf, lr or cnn)");
  ClassifierSpec spec = default_spec(*family);
  if (const json* h = r.child("hyperparameters"))
    spec.hyperparameters = hyper_from_json(*family, *h, r.path_of("hyperparameters"));
  if (const json* t = r.child("train"))
    spec.train = train_config_from_json(*t, r.path_of("train"), spec.train);
  spec.seed = r.count("seed", 0);
  r.finish();
  return spec;
}

InputKind input_kind(Family f) {
  return f == Family::CNN ? InputKind::TokenMatrix : InputKind::MeanVector;
}

// ---------------------------------------------------------------------------

FeatureRefs::FeatureRefs(std::span<const Representation> reps) {
  items_.reserve(reps.size());
  for (const auto& r : reps) items_.push_back(&r);
}

FeatureStore FeatureStore::build(std::span<const corpus::Dataset* const> datasets,
                                 const embedding::EmbeddingModel& emb, InputKind kind,
                                 std::size_t max_len) {
  FeatureStore store;
  for (const auto* ds : datasets) {
    for (const auto& doc : ds->documents()) {
      if (store.contains(doc.id)) continue;
      if (kind == InputKind::MeanVector)
        store.add(doc.id, embedding::doc_mean_vector(doc, emb));
      else
        store.add(doc.id, embedding::doc_token_matrix(doc, emb, max_len));
    }
  }
  return store;
}

void FeatureStore::add(const std::string& id, Representation rep) {
  if (!index_.emplace(id, reps_.size()).second)
    throw InvalidArgument("duplicate feature id " + id);
  reps_.push_back(std::make_unique<Representation>(std::move(rep)));
}

const Representation& FeatureStore::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InvalidArgument("no representation for document " + id);
  return *reps_[it->second];
}

FeatureRefs FeatureStore::refs(const corpus::Dataset& ds) const {
  FeatureRefs out;
  out.reserve(ds.size());
  for (const auto& d : ds.documents()) out.push_back(at(d.id));
  return out;
}

// ---------------------------------------------------------------------------

Classifier::Classifier(ClassifierSpec spec) : spec_(std::move(spec)) {
  if (spec_.hyperparameters.index() != default_hyperparameters(spec_.family).index())
    throw InvalidArgument("hyperparameters do not belong to family " +
                          std::string(to_string(spec_.family)));
}

void Classifier::check_inputs(const FeatureRefs& inputs, std::span<const Label> labels) const {
  if (inputs.size() != labels.size())
    throw InvalidArgument("inputs and labels differ in length (" + std::to_string(inputs.size()) +
                          " vs " + std::to_string(labels.size()) + ")");
  const bool want_matrix = input_kind(spec_.family) == InputKind::TokenMatrix;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const bool is_matrix = std::holds_alternative<embedding::TokenMatrix>(inputs[i]);
    if (is_matrix != want_matrix)
      throw InvalidArgument(std::string("representation mismatch: ") +
                            std::string(to_string(spec_.family)) + " expects " +
                            (want_matrix ? "token matrices" : "mean vectors"));
  }
}

void Classifier::fit(const FeatureRefs& inputs, std::span<const Label> labels) {
  fit(inputs, labels, spec_.train);
}

void Classifier::fit(const FeatureRefs& inputs, std::span<const Label> labels,
                     const TrainConfig& cfg) {
  cfg.validate();
  check_inputs(inputs, labels);
  if (inputs.size() < 2) throw InvalidArgument("fit needs at least two examples");
  bool has[2] = {false, false};
  for (Label l : labels) has[corpus::index_of(l)] = true;
  if (!has[0] || !has[1]) throw InvalidArgument("fit needs both classes in the labels");
  summary_ = {};
  do_fit(inputs, labels, cfg);
  trained_ = true;
  if (spec_.family != Family::CNN) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const double p = std::clamp(do_predict(inputs[i]), 1e-15, 1.0 - 1e-15);
      const bool abnormal = labels[i] == Label::Abnormal;
      loss -= abnormal ? std::log(p) : std::log1p(-p);
      correct += (p >= 0.5) == abnormal;
    }
    summary_.accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
    if (summary_.epoch_loss.empty()) summary_.final_loss = loss / static_cast<double>(inputs.size());
  }
}

void Classifier::fine_tune(const FeatureRefs& inputs, std::span<const Label> labels,
                           const TrainConfig& cfg) {
  if (!supports_fine_tune())
    throw UnsupportedOperation("fine_tune is not supported by family " +
                               std::string(to_string(spec_.family)));
  if (!trained_) throw NotTrained("fine_tune needs a trained classifier");
  cfg.validate();
  check_inputs(inputs, labels);
  if (cfg.epochs == 0 || inputs.empty()) return;
  do_fine_tune(inputs, labels, cfg);
}

void Classifier::do_fine_tune(const FeatureRefs&, std::span<const Label>, const TrainConfig&) {
  throw UnsupportedOperation("fine_tune is not supported by family " +
                             std::string(to_string(spec_.family)));
}

double Classifier::predict_proba(const Representation& input) const {
  if (!trained_) throw NotTrained("predict_proba needs a trained classifier");
  const bool want_matrix = input_kind(spec_.family) == InputKind::TokenMatrix;
  if (std::holds_alternative<embedding::TokenMatrix>(input) != want_matrix)
    throw InvalidArgument("representation mismatch for family " + std::string(to_string(spec_.family)));
  return do_predict(input);
}

std::vector<double> Classifier::predict_proba(const FeatureRefs& inputs) const {
  std::vector<double> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = predict_proba(inputs[i]);
  return out;
}

json Classifier::state() const {
  if (!trained_) throw NotTrained("untrained classifier has no state");
  return do_state();
}

void Classifier::load_state(const json& state) {
  do_load_state(state);
  trained_ = true;
}

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
  switch (spec.family) {
    case Family::SVM: return std::make_unique<LinearSvm>(spec);
    case Family::SGD: return std::make_unique<SgdClassifier>(spec);
    case Family::NB: return std::make_unique<GaussianNb>(spec);
    case Family::RF: return std::make_unique<RandomForest>(spec);
    case Family::LR: return std::make_unique<LogisticRegression>(spec);
    case Family::CNN: return std::make_unique<CnnClassifier>(spec);
  }
  throw InvalidArgument("unknown classifier family");
}

// ---------------------------------------------------------------------------

double round_significant(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

namespace {

void round_numbers(json& j, int digits) {
  if (j.is_number_float()) {
    j = round_significant(j.get<double>(), digits);
  } else if (j.is_array() || j.is_object()) {
    for (auto& v : j) round_numbers(v, digits);
  }
}

}  // namespace

json model_to_json(const Classifier& c) {
  json state = c.state();
  if (c.family() == Family::CNN) round_numbers(state, 9);
  return {{"format_version", 1}, {"spec", to_json(c.spec())}, {"state", std::move(state)}};
}

std::unique_ptr<Classifier> model_from_json(const json& j) {
  if (!j.is_object() || j.value("format_version", 0) != 1)
    throw SchemaError("/format_version", "unsupported model format (expected 1)");
  auto c = make_classifier(spec_from_json(j.at("spec"), "/spec"));
  c->load_state(j.at("state"));
  return c;
}

void save_model(const Classifier& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << model_to_json(c).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::unique_ptr<Classifier> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), std::string("malformed JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace sstl::models
