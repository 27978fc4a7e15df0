#include "sstl/config.hpp"

#include <fstream>

#include "sstl/error.hpp"
#include "sstl/json_reader.hpp"

namespace sstl::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

corpus::SyntheticConfig parse_synthetic(const json& j, std::uint64_t seed) {
  ObjectReader r(j, "/synthetic");
  corpus::SyntheticConfig c;
  c.n_labeled_target = r.count("n_labeled_target", c.n_labeled_target, 1);
  c.n_unlabeled = r.count("n_unlabeled", c.n_unlabeled, 1);
  c.n_labeled_source = r.count("n_labeled_source", c.n_labeled_source, 1);
  c.abnormal_fraction = r.number("abnormal_fraction", c.abnormal_fraction, 0.0, 1.0, true, true);
  c.vocab_size_per_class = r.count("vocab_size_per_class", c.vocab_size_per_class, 1);
  c.background_vocab_size = r.count("background_vocab_size", c.background_vocab_size, 1);
  c.indicative_rate = r.number("indicative_rate", c.indicative_rate, 0.0, 1.0);
  c.domain_shift = r.number("domain_shift", c.domain_shift, 0.0, 1.0);
  c.negation_rate = r.number("negation_rate", c.negation_rate, 0.0, 1.0);
  c.doc_length_mean = r.count("doc_length_mean", c.doc_length_mean, 1);
  c.seed = r.count("seed", seed);
  r.finish();
  return c;
}

embedding::SkipgramConfig parse_skipgram(const json& j, std::uint64_t seed) {
  ObjectReader r(j, "/skipgram");
  embedding::SkipgramConfig c;
  c.dim = r.count("dim", c.dim, 1);
  c.window = r.count("window", c.window, 1);
  c.negatives = r.count("negatives", c.negatives, 1);
  c.epochs = r.count("epochs", c.epochs, 1);
  c.learning_rate = r.number("learning_rate", c.learning_rate, 0.0, 10.0, true);
  c.min_count = r.count("min_count", c.min_count, 1);
  c.seed = r.count("seed", seed);
  r.finish();
  return c;
}

selftrain::SelfTrainConfig parse_selftrain(const json& j, std::uint64_t seed) {
  ObjectReader r(j, "/selftrain");
  selftrain::SelfTrainConfig c;
  c.tau = r.number("tau", c.tau, 0.0, 1.0, false, true);
  c.max_iterations = r.count("max_iterations", c.max_iterations, 1);
  c.validation_fraction =
      r.number("validation_fraction", c.validation_fraction, 0.0, 1.0, true, true);
  const std::string bal = r.string("balance", std::string(selftrain::to_string(c.balance)));
  auto policy = selftrain::parse_balance(bal);
  if (!policy)
    throw SchemaError(r.path_of("balance"), "unknown policy \"" + bal +
                                                "\" (expected confidence_ranked or random_undersample)");
  c.balance = *policy;
  if (const json* fit = r.child("fit"))
    c.fit_cfg = models::train_config_from_json(*fit, r.path_of("fit"), models::TrainConfig{});
  if (const json* ft = r.child("fine_tune"))
    c.fine_tune_cfg = models::train_config_from_json(*ft, r.path_of("fine_tune"), c.fine_tune_cfg);
  c.seed = r.count("seed", seed);
  r.finish();
  return c;
}

void parse_experiment(const json& j, RunConfig& cfg) {
  ObjectReader r(j, "/experiment");
  auto& e = cfg.experiment;
  if (const json* modes = r.child("modes")) {
    if (!modes->is_array() || modes->empty())
      throw SchemaError(r.path_of("modes"), "expected a non-empty array of modes");
    e.modes.clear();
    for (std::size_t i = 0; i < modes->size(); ++i) {
      const json& m = (*modes)[i];
      auto mode = m.is_string() ? eval::parse_mode(m.get<std::string>()) : std::nullopt;
      if (!mode)
        throw SchemaError(r.path_of("modes") + "/" + std::to_string(i),
                          "expected one of supervised, selftrain, transfer");
      if (std::find(e.modes.begin(), e.modes.end(), *mode) != e.modes.end())
        throw SchemaError(r.path_of("modes") + "/" + std::to_string(i), "duplicate mode");
      e.modes.push_back(*mode);
    }
  }
  if (const json* fr = r.child("fractions")) {
    if (!fr->is_array() || fr->empty())
      throw SchemaError(r.path_of("fractions"), "expected a non-empty array of fractions");
    e.fractions.clear();
    for (std::size_t i = 0; i < fr->size(); ++i) {
      const json& f = (*fr)[i];
      if (!f.is_number() || f.get<double>() < 0.0 || f.get<double>() > 1.0)
        throw SchemaError(r.path_of("fractions") + "/" + std::to_string(i),
                          "fraction must be a number in [0, 1]");
      e.fractions.push_back(f.get<double>());
    }
  }
  e.k = r.count("k", e.k, 2);
  e.seed = r.count("seed", cfg.seed);
  cfg.paths.target = r.string("target", "");
  cfg.paths.unlabeled = r.string("unlabeled", "");
  cfg.paths.source = r.string("source", "");
  cfg.paths.embeddings = r.string("embeddings", "");
  r.finish();
  const bool transfer =
      std::find(e.modes.begin(), e.modes.end(), eval::Mode::Transfer) != e.modes.end();
  for (std::size_t i = 0; i < e.fractions.size(); ++i)
    if (e.fractions[i] == 0.0 && !transfer)
      throw SchemaError(r.path_of("fractions") + "/" + std::to_string(i),
                        "fraction 0 is only valid with transfer mode");
}

models::Grid parse_grid(const json& j) {
  ObjectReader r(j, "/grid");
  models::Grid grid;
  for (const auto& [key, values] : j.items()) {
    const json* v = r.child(key);
    if (!v->is_array() || v->empty())
      throw SchemaError(r.path_of(key), "expected a non-empty array of values");
    grid[key] = std::vector<json>(v->begin(), v->end());
  }
  if (grid.empty()) throw SchemaError("/grid", "empty grid");
  return grid;
}

ordered_json train_json(const models::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size}, {"epochs", t.epochs}};
}

}  // namespace

RunConfig parse_config(const json& j) {
  ObjectReader r(j, "");
  RunConfig cfg;
  cfg.version = static_cast<int>(r.count("version", kConfigVersion, kConfigVersion, kConfigVersion));
  cfg.seed = r.count("seed", 0);
  const json empty = json::object();
  auto section = [&](const char* key) -> const json& {
    const json* s = r.child(key);
    return s ? *s : empty;
  };
  cfg.synthetic = parse_synthetic(section("synthetic"), cfg.seed);
  cfg.skipgram = parse_skipgram(section("skipgram"), cfg.seed);
  {
    const json& cj = section("classifier");
    cfg.classifier = models::spec_from_json(cj, "/classifier");
    if (!cj.contains("seed")) cfg.classifier.seed = cfg.seed;
  }
  {
    ObjectReader rep(section("representation"), "/representation");
    cfg.max_len = rep.count("max_len", 0);
    if (cfg.max_len != 0 && cfg.max_len < embedding::kMinTokenMatrixLength)
      throw SchemaError(rep.path_of("max_len"), "max_len must be 0 (automatic) or at least 15");
    rep.finish();
  }
  cfg.selftrain = parse_selftrain(section("selftrain"), cfg.seed);
  {
    ObjectReader tr(section("transfer"), "/transfer");
    cfg.target_fraction = tr.number("target_fraction", 1.0, 0.0, 1.0);
    tr.finish();
  }
  parse_experiment(section("experiment"), cfg);
  if (const json* g = r.child("grid")) cfg.grid = parse_grid(*g);
  cfg.grid_k = r.count("grid_k", cfg.grid_k, 2);
  r.finish();
  if (std::find(cfg.experiment.modes.begin(), cfg.experiment.modes.end(), eval::Mode::Transfer) !=
          cfg.experiment.modes.end() &&
      !models::make_classifier(cfg.classifier)->supports_fine_tune())
    throw SchemaError("/experiment/modes", "transfer needs a classifier family that supports fine-tuning (lr, sgd, svm, cnn), got " +
                                               std::string(models::to_string(cfg.classifier.family)));
  cfg.experiment.spec = cfg.classifier;
  cfg.experiment.selftrain = cfg.selftrain;
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInput("config not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  const auto& s = cfg.synthetic;
  j["synthetic"] = {{"n_labeled_target", s.n_labeled_target},
                    {"n_unlabeled", s.n_unlabeled},
                    {"n_labeled_source", s.n_labeled_source},
                    {"abnormal_fraction", s.abnormal_fraction},
                    {"vocab_size_per_class", s.vocab_size_per_class},
                    {"background_vocab_size", s.background_vocab_size},
                    {"indicative_rate", s.indicative_rate},
                    {"domain_shift", s.domain_shift},
                    {"negation_rate", s.negation_rate},
                    {"doc_length_mean", s.doc_length_mean},
                    {"seed", s.seed}};
  const auto& k = cfg.skipgram;
  j["skipgram"] = {{"dim", k.dim},         {"window", k.window},
                   {"negatives", k.negatives}, {"epochs", k.epochs},
                   {"learning_rate", k.learning_rate}, {"min_count", k.min_count},
                   {"seed", k.seed}};
  j["classifier"] = ordered_json::parse(models::to_json(cfg.classifier).dump());
  j["representation"] = {{"max_len", cfg.max_len}};
  const auto& t = cfg.selftrain;
  ordered_json st;
  st["tau"] = t.tau;
  st["max_iterations"] = t.max_iterations;
  st["validation_fraction"] = t.validation_fraction;
  st["balance"] = selftrain::to_string(t.balance);
  if (t.fit_cfg) st["fit"] = train_json(*t.fit_cfg);
  st["fine_tune"] = train_json(t.fine_tune_cfg);
  st["seed"] = t.seed;
  j["selftrain"] = st;
  j["transfer"] = {{"target_fraction", cfg.target_fraction}};
  ordered_json e;
  e["modes"] = ordered_json::array();
  for (auto m : cfg.experiment.modes) e["modes"].push_back(eval::to_string(m));
  e["fractions"] = cfg.experiment.fractions;
  e["k"] = cfg.experiment.k;
  e["seed"] = cfg.experiment.seed;
  e["target"] = cfg.paths.target;
  e["unlabeled"] = cfg.paths.unlabeled;
  e["source"] = cfg.paths.source;
  e["embeddings"] = cfg.paths.embeddings;
  j["experiment"] = e;
  if (cfg.grid) {
    ordered_json g = ordered_json::object();
    for (const auto& [key, values] : *cfg.grid)
      g[key] = ordered_json::parse(json(values).dump());
    j["grid"] = g;
  }
  j["grid_k"] = cfg.grid_k;
  return j;
}

}  // namespace sstl::cli
