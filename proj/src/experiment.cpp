#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sstl/experiment.hpp"
#include "sstl/rng.hpp"

namespace sstl::eval {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Supervised: return "supervised";
    case Mode::SelfTrain: return "selftrain";
    case Mode::Transfer: return "transfer";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::Supervised, Mode::SelfTrain, Mode::Transfer})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (modes.empty()) throw InvalidArgument("experiment: no modes");
  if (fractions.empty()) throw InvalidArgument("experiment: no fractions");
  if (k < 2) throw InvalidArgument("experiment: k must be at least 2");
  const bool transfer =
      std::find(modes.begin(), modes.end(), Mode::Transfer) != modes.end();
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0))
      throw InvalidArgument("experiment: fraction " + format_number(f) + " outside [0, 1]");
    if (f == 0.0 && !transfer)
      throw InvalidArgument("experiment: fraction 0 needs transfer mode (only transfer runs without target labels)");
  }
  spec.validate();
  selftrain.validate();
}

const Cell* ExperimentResult::find(Mode m, double fraction) const {
  for (const auto& c : cells)
    if (c.mode == m && c.fraction == fraction) return &c;
  return nullptr;
}

namespace {

corpus::Dataset fold_training_set(const corpus::Dataset& train, double fraction,
                                  std::uint64_t fold_seed) {
  if (fraction == 0.0) return corpus::Dataset({}, train.domain());
  if (fraction == 1.0) return train;
  return corpus::stratified_subsample(train, fraction, derive_seed(fold_seed, 7));
}

selftrain::SelfTrainConfig fold_selftrain_config(const ExperimentConfig& cfg,
                                                 std::uint64_t fold_seed) {
  auto st = cfg.selftrain;
  st.seed = derive_seed(cfg.selftrain.seed, fold_seed);
  st.threads = 1;
  return st;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
  cfg.validate();
  if (!data.target || !data.features) throw InvalidArgument("experiment: target and features are required");
  const bool needs_pool = std::any_of(cfg.modes.begin(), cfg.modes.end(),
                                      [](Mode m) { return m != Mode::Supervised; });
  const bool needs_source =
      std::find(cfg.modes.begin(), cfg.modes.end(), Mode::Transfer) != cfg.modes.end();
  if (needs_pool && !data.pool) throw InvalidArgument("experiment: self-training needs an unlabeled pool");
  if (needs_source && !data.source) throw InvalidArgument("experiment: transfer needs a source dataset");

  const auto& target = *data.target;
  const auto& features = *data.features;
  const auto folds = corpus::stratified_kfold(target, cfg.k, cfg.seed);

  std::optional<selftrain::SourceModel> source;
  if (needs_source) {
    auto st = cfg.selftrain;
    st.seed = derive_seed(cfg.selftrain.seed, cfg.seed);
    source = selftrain::train_source_model(*data.source, cfg.spec, features, st);
  }

  ExperimentResult result;
  for (double fraction : cfg.fractions) {
    for (Mode mode : cfg.modes) {
      if (fraction == 0.0 && mode != Mode::Transfer) continue;
      Cell cell;
      cell.mode = mode;
      cell.fraction = fraction;
      std::vector<Metrics> metrics(cfg.k);
      std::vector<FoldLog> logs(mode == Mode::Supervised ? 0 : cfg.k);
      parallel_for(cfg.k, cfg.threads, [&](std::size_t f) {
        try {
          const std::uint64_t fold_seed = cfg.seed + f;
          const corpus::Dataset train = fold_training_set(folds[f].train, fraction, fold_seed);
          auto spec = cfg.spec;
          spec.seed = derive_seed(cfg.spec.seed, fold_seed);
          std::unique_ptr<models::Classifier> model;
          if (mode == Mode::Supervised) {
            model = models::make_classifier(spec);
            model->fit(features.refs(train), train.labels());
          } else {
            const auto st = fold_selftrain_config(cfg, fold_seed);
            selftrain::SelfTrainResult r =
                mode == Mode::SelfTrain
                    ? selftrain::self_train(*models::make_classifier(spec), train, *data.pool,
                                            features, st)
                    : selftrain::self_train_transfer(*source, train, *data.pool, features, st);
            model = std::move(r.model);
            logs[f] = {f, r.stop, std::move(r.logs)};
          }
          metrics[f] = evaluate(*model, features, folds[f].test);
        } catch (const FoldError&) {
          throw;
        } catch (const std::exception& e) {
          throw FoldError(f, std::string(to_string(mode)) + "@" + format_fraction(fraction) +
                                 ": " + e.what());
        }
      });
      cell.results = FoldResults::from_folds(std::move(metrics));
      cell.logs = std::move(logs);
      result.cells.push_back(std::move(cell));
    }
  }

  const Cell* sup = result.find(Mode::Supervised, 1.0);
  for (auto& cell : result.cells) {
    const auto f1 = cell.results.values(&Metrics::f1);
    if (sup && &cell != sup)
      cell.vs_supervised = paired_ttest(f1, sup->results.values(&Metrics::f1));
    const Cell* st = result.find(Mode::SelfTrain, cell.fraction);
    if (st && &cell != st && cell.mode != Mode::Supervised)
      cell.vs_selftrain = paired_ttest(f1, st->results.values(&Metrics::f1));
  }
  return result;
}

std::string marker(const Cell& cell, const std::optional<TTestResult>& test, const Cell* ref,
                   std::string_view symbol) {
  if (!test || !ref || !test->significant_at_05) return "";
  return cell.results.f1.mean > ref->results.f1.mean ? std::string(symbol) : "";
}

std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", f);
  return buf;
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_results_csv(const ExperimentResult& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "system,fraction,fold,precision,recall,f1,accuracy\n";
  for (const auto& c : r.cells) {
    for (std::size_t f = 0; f < c.results.folds.size(); ++f) {
      const auto& m = c.results.folds[f];
      out << to_string(c.mode) << ',' << format_fraction(c.fraction) << ',' << f << ','
          << format_number(m.precision) << ',' << format_number(m.recall) << ','
          << format_number(m.f1) << ',' << format_number(m.accuracy) << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_summary_csv(const ExperimentResult& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "system,fraction,precision_mean,precision_sd,recall_mean,recall_sd,f1_mean,f1_sd,"
         "accuracy_mean,accuracy_sd,p_vs_supervised,p_vs_selftrain,sig_vs_supervised,"
         "sig_vs_selftrain\n";
  const Cell* sup = r.find(Mode::Supervised, 1.0);
  for (const auto& c : r.cells) {
    const Cell* st = r.find(Mode::SelfTrain, c.fraction);
    auto p = [](const std::optional<TTestResult>& t) {
      return t ? format_number(t->p_value) : std::string();
    };
    const auto& s = c.results;
    out << to_string(c.mode) << ',' << format_fraction(c.fraction) << ','
        << format_number(s.precision.mean) << ',' << format_number(s.precision.sd) << ','
        << format_number(s.recall.mean) << ',' << format_number(s.recall.sd) << ','
        << format_number(s.f1.mean) << ',' << format_number(s.f1.sd) << ','
        << format_number(s.accuracy.mean) << ',' << format_number(s.accuracy.sd) << ','
        << p(c.vs_supervised) << ',' << p(c.vs_selftrain) << ','
        << marker(c, c.vs_supervised, sup, "*") << ','
        << marker(c, c.vs_selftrain, st, "†") << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_logs_jsonl(const ExperimentResult& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& c : r.cells) {
    for (const auto& fl : c.logs) {
      for (const auto& it : fl.iterations) {
        nlohmann::ordered_json j;
        j["system"] = to_string(c.mode);
        j["fraction"] = c.fraction;
        j["fold"] = fl.fold;
        const auto entry = it.to_json();
        for (const auto& [key, value] : entry.items())
          j[key] = value;
        j["stop"] = to_string(fl.stop);
        out << j.dump() << '\n';
      }
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sstl::eval
