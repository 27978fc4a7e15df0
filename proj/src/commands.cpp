#include "sstl/commands.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sstl/error.hpp"
#include "sstl/eval.hpp"

namespace sstl::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), std::size_t(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

namespace {

void require_input(const fs::path& p, const std::string& what) {
  if (p.empty()) throw MissingInput(what + " path not given");
  if (!fs::exists(p)) throw MissingInput(what + " not found: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

/// Records inputs and outputs of one command and writes the manifest.
class Run {
 public:
  Run(std::string command, fs::path dir, const RunConfig* cfg)
      : command_(std::move(command)), dir_(std::move(dir)), cfg_(cfg) {}

  void input(const std::string& role, const fs::path& p) {
    inputs_.push_back({{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p)}});
  }
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return dir_ / name;
  }

  void finish(const fs::path& config_path, const fs::path& manifest_path) {
    ordered_json m;
    m["command"] = command_;
    if (cfg_) {
      write_text(config_path, to_json(*cfg_).dump(2) + "\n");
      m["seed"] = cfg_->seed;
      m["resolved_config"] = config_path.filename().string();
    }
    m["inputs"] = inputs_;
    ordered_json outs = ordered_json::array();
    for (const auto& name : outputs_)
      outs.push_back({{"path", name}, {"sha256", sha256_file(dir_ / name)}});
    m["outputs"] = outs;
    write_text(manifest_path, m.dump(2) + "\n");
  }
  void finish() { finish(dir_ / "config.resolved.json", dir_ / "manifest.json"); }

 private:
  std::string command_;
  fs::path dir_;
  const RunConfig* cfg_;
  ordered_json inputs_ = ordered_json::array();
  std::vector<std::string> outputs_;
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

RunConfig load_config(const CommandOptions& o) {
  RunConfig cfg = parse_config(o.config);
  cfg.selftrain.threads = o.threads;
  cfg.experiment.selftrain.threads = o.threads;
  cfg.experiment.threads = o.threads;
  return cfg;
}

corpus::Dataset load_dataset(Run& run, const std::string& role, const fs::path& p) {
  require_input(p, role);
  auto ds = corpus::load_jsonl(p);
  run.input(role, p);
  return ds;
}

models::FeatureStore build_features(const RunConfig& cfg, const embedding::EmbeddingModel& emb,
                                    std::initializer_list<const corpus::Dataset*> datasets,
                                    std::size_t* max_len_out = nullptr) {
  std::vector<const corpus::Dataset*> list(datasets);
  const auto kind = models::input_kind(cfg.classifier.family);
  std::size_t max_len = cfg.max_len;
  if (kind == models::InputKind::TokenMatrix && max_len == 0) {
    std::vector<corpus::Document> docs;
    for (const auto* ds : list)
      if (ds->is_labeled() && !ds->empty())
        docs.insert(docs.end(), ds->documents().begin(), ds->documents().end());
    max_len = embedding::default_max_len(docs);
  }
  if (max_len_out) *max_len_out = max_len;
  return models::FeatureStore::build(list, emb, kind, max_len);
}

void write_training_summary(const models::Classifier& c, const fs::path& path) {
  const auto& s = c.training_summary();
  ordered_json j;
  j["family"] = models::to_string(c.family());
  j["epoch_loss"] = s.epoch_loss;
  j["final_loss"] = s.final_loss;
  j["accuracy"] = s.accuracy;
  write_text(path, j.dump(2) + "\n");
}

void write_selftrain_outputs(Run& run, const selftrain::SelfTrainResult& r) {
  std::ostringstream log, pseudo;
  for (const auto& it : r.logs) {
    auto j = it.to_json();
    j["stop"] = selftrain::to_string(r.stop);
    log << j.dump() << '\n';
    for (const auto& p : it.added) {
      ordered_json pj;
      pj["i"] = it.index;
      pj["id"] = p.id;
      pj["label"] = corpus::to_string(p.label);
      pj["confidence"] = p.confidence;
      pseudo << pj.dump() << '\n';
    }
  }
  write_text(run.output("selftrain_log.jsonl"), log.str());
  write_text(run.output("pseudo_labels.jsonl"), pseudo.str());
  models::save_model(*r.model, run.output("model.json"));
}

embedding::EmbeddingModel load_or_train_embeddings(Run& run, const RunConfig& cfg,
                                                    const fs::path& path,
                                                    std::initializer_list<const corpus::Dataset*> corpus) {
  if (!path.empty()) {
    require_input(path, "embeddings");
    auto m = embedding::load_embeddings(path);
    run.input("embeddings", path);
    return m;
  }
  std::vector<std::vector<std::string>> sentences;
  for (const auto* ds : corpus)
    if (ds)
      for (const auto& d : ds->documents()) sentences.push_back(d.tokens);
  auto m = embedding::train_skipgram(sentences, cfg.skipgram);
  embedding::save_embeddings(m, run.output("embeddings.txt"));
  return m;
}

}  // namespace

void gen_data(const CommandOptions& o) {
  const RunConfig cfg = load_config(o);
  Run out("gen-data", o.out, &cfg);
  out.input("config", o.config);
  make_dir(o.out);
  const auto data = corpus::generate_synthetic(cfg.synthetic);
  corpus::save_jsonl(data.target_labeled, out.output("target_labeled.jsonl"));
  corpus::save_jsonl(data.target_unlabeled, out.output("target_unlabeled.jsonl"));
  corpus::save_jsonl(data.target_unlabeled_truth, out.output("target_unlabeled.truth.jsonl"));
  corpus::save_jsonl(data.source_labeled, out.output("source_labeled.jsonl"));
  out.finish();
}

void train_embeddings(const CommandOptions& o, const std::vector<fs::path>& corpus_files) {
  if (corpus_files.empty()) throw MissingInput("no corpus files given");
  const RunConfig cfg = load_config(o);
  const fs::path dir = o.out.has_parent_path() ? o.out.parent_path() : fs::path(".");
  Run run("train-embeddings", dir, &cfg);
  run.input("config", o.config);
  std::vector<std::vector<std::string>> sentences;
  for (std::size_t i = 0; i < corpus_files.size(); ++i) {
    const auto ds = load_dataset(run, "corpus", corpus_files[i]);
    for (const auto& d : ds.documents()) sentences.push_back(d.tokens);
  }
  make_dir(dir);
  const auto model = embedding::train_skipgram(sentences, cfg.skipgram);
  embedding::save_embeddings(model, run.output(o.out.filename().string()));
  run.finish(dir / (o.out.filename().string() + ".config.json"),
             dir / (o.out.filename().string() + ".manifest.json"));
}

void train(const CommandOptions& o, const fs::path& data, const fs::path& embeddings) {
  RunConfig cfg = load_config(o);
  Run run("train", o.out, &cfg);
  run.input("config", o.config);
  const auto ds = load_dataset(run, "data", data);
  require_input(embeddings, "embeddings");
  const auto emb = embedding::load_embeddings(embeddings);
  run.input("embeddings", embeddings);
  make_dir(o.out);
  const auto features = build_features(cfg, emb, {&ds});

  models::ClassifierSpec spec = cfg.classifier;
  if (cfg.grid) {
    const auto gs =
        models::grid_search(spec, *cfg.grid, ds, cfg.grid_k, cfg.seed, features, o.threads);
    std::ostringstream csv;
    csv << "point,spec,mean_f1\n";
    for (std::size_t i = 0; i < gs.points.size(); ++i) {
      std::string js = models::to_json(gs.points[i].spec).dump();
      std::string quoted;
      for (char ch : js) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      csv << i << ",\"" << quoted << "\"," << eval::format_number(gs.points[i].score) << '\n';
    }
    write_text(run.output("grid.csv"), csv.str());
    spec = gs.best;
  }
  auto model = models::make_classifier(spec);
  model->fit(features.refs(ds), ds.labels());
  models::save_model(*model, run.output("model.json"));
  write_training_summary(*model, run.output("training.json"));
  run.finish();
}

void selftrain(const CommandOptions& o, const fs::path& labeled, const fs::path& unlabeled,
               const fs::path& embeddings) {
  RunConfig cfg = load_config(o);
  Run run("selftrain", o.out, &cfg);
  run.input("config", o.config);
  const auto lab = load_dataset(run, "labeled", labeled);
  const auto pool = load_dataset(run, "unlabeled", unlabeled);
  require_input(embeddings, "embeddings");
  const auto emb = embedding::load_embeddings(embeddings);
  run.input("embeddings", embeddings);
  make_dir(o.out);
  const auto features = build_features(cfg, emb, {&lab, &pool});
  const auto c0 = models::make_classifier(cfg.classifier);
  const auto r = selftrain::self_train(*c0, lab, pool, features, cfg.selftrain);
  write_selftrain_outputs(run, r);
  run.finish();
}

void transfer(const CommandOptions& o, const fs::path& source, const fs::path& target,
              const fs::path& unlabeled, const fs::path& embeddings) {
  RunConfig cfg = load_config(o);
  Run run("transfer", o.out, &cfg);
  run.input("config", o.config);
  const auto src = load_dataset(run, "source", source);
  const auto tgt_full = load_dataset(run, "target", target);
  const auto pool = load_dataset(run, "unlabeled", unlabeled);
  require_input(embeddings, "embeddings");
  const auto emb = embedding::load_embeddings(embeddings);
  run.input("embeddings", embeddings);
  make_dir(o.out);
  corpus::Dataset tgt({}, tgt_full.domain());
  if (cfg.target_fraction == 1.0)
    tgt = tgt_full;
  else if (cfg.target_fraction > 0.0)
    tgt = corpus::stratified_subsample(tgt_full, cfg.target_fraction, cfg.seed);
  const auto features = build_features(cfg, emb, {&src, &tgt, &pool});
  const auto r =
      selftrain::self_train_transfer(src, tgt, pool, cfg.classifier, features, cfg.selftrain);
  write_selftrain_outputs(run, r);
  run.finish();
}

void evaluate(const CommandOptions& o) {
  RunConfig cfg = load_config(o);
  Run run("evaluate", o.out, &cfg);
  run.input("config", o.config);
  const auto& modes = cfg.experiment.modes;
  const bool need_pool = std::any_of(modes.begin(), modes.end(),
                                     [](eval::Mode m) { return m != eval::Mode::Supervised; });
  const bool need_source =
      std::find(modes.begin(), modes.end(), eval::Mode::Transfer) != modes.end();
  const auto target = load_dataset(run, "target", cfg.paths.target);
  std::optional<corpus::Dataset> pool, source;
  if (need_pool) pool = load_dataset(run, "unlabeled", cfg.paths.unlabeled);
  if (need_source) source = load_dataset(run, "source", cfg.paths.source);
  make_dir(o.out);
  const auto emb = load_or_train_embeddings(run, cfg, cfg.paths.embeddings,
                                            {&target, pool ? &*pool : nullptr,
                                             source ? &*source : nullptr});
  const corpus::Dataset none;
  const auto features = build_features(cfg, emb, {&target, pool ? &*pool : &none,
                                                   source ? &*source : &none});
  eval::ExperimentData data{&target, pool ? &*pool : nullptr, source ? &*source : nullptr,
                            &features};
  const auto result = eval::run_experiment(cfg.experiment, data);
  eval::write_results_csv(result, run.output("results.csv"));
  eval::write_summary_csv(result, run.output("summary.csv"));
  eval::write_logs_jsonl(result, run.output("selftrain_log.jsonl"));
  run.finish();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string mean_sd(const std::string& mean, const std::string& sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f±%.4f", std::stod(mean), std::stod(sd));
  return buf;
}

}  // namespace

void report(const std::vector<fs::path>& runs, const fs::path& out) {
  if (runs.empty()) throw MissingInput("no run directories given");
  const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  Run run("report", dir, nullptr);
  std::ostringstream table;
  table << "run,system,fraction,precision,recall,f1,sig_vs_supervised,sig_vs_selftrain\n";
  for (const auto& r : runs) {
    const fs::path summary = r / "summary.csv";
    const std::string run_name =
        (r.filename().empty() ? r.parent_path().filename() : r.filename()).string();
    require_input(summary, "summary");
    run.input("summary", summary);
    std::ifstream in(summary);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv(line);
    if (header.size() != 14 || header[0] != "system")
      throw SchemaError(summary.string() + ":1", "not an experiment summary");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 14)
        throw SchemaError(summary.string() + ":" + std::to_string(lineno),
                          "expected 14 fields, found " + std::to_string(f.size()));
      table << run_name << ',' << f[0] << ',' << f[1] << ',' << mean_sd(f[2], f[3])
            << ',' << mean_sd(f[4], f[5]) << ',' << mean_sd(f[6], f[7]) << ',' << f[12] << ','
            << f[13] << '\n';
    }
  }
  make_dir(dir);
  write_text(run.output(out.filename().string()), table.str());
  run.finish({}, dir / (out.filename().string() + ".manifest.json"));
}

}  // namespace sstl::cli
