#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "sstl/commands.hpp"
#include "sstl/error.hpp"

namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(int code, const char* kind, const std::string& message, const std::string& where = "") {
  nlohmann::ordered_json j;
  j["error"] = kind;
  if (!where.empty()) j["where"] = where;
  j["message"] = one_line(message);
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace sstl::cli;

  CLI::App app{"Self-trained transfer learning for binary report classification"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads (1 gives the reference output)")
      ->check(CLI::PositiveNumber);

  CommandOptions o;
  fs::path data, embeddings, labeled, unlabeled, source, target;
  std::vector<fs::path> corpus, runs;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic two-domain corpus");
  gen->add_option("--config", o.config)->required();
  gen->add_option("--out", o.out)->required();

  auto* emb = app.add_subcommand("train-embeddings", "Train skip-gram embeddings");
  emb->add_option("--config", o.config)->required();
  emb->add_option("--corpus", corpus)->required();
  emb->add_option("--out", o.out)->required();

  auto* tr = app.add_subcommand("train", "Fit a classifier");
  tr->add_option("--config", o.config)->required();
  tr->add_option("--data", data)->required();
  tr->add_option("--embeddings", embeddings)->required();
  tr->add_option("--out", o.out)->required();

  auto* st = app.add_subcommand("selftrain", "Self-train on target data");
  st->add_option("--config", o.config)->required();
  st->add_option("--labeled", labeled)->required();
  st->add_option("--unlabeled", unlabeled)->required();
  st->add_option("--embeddings", embeddings)->required();
  st->add_option("--out", o.out)->required();

  auto* tf = app.add_subcommand("transfer", "Source training followed by self-training");
  tf->add_option("--config", o.config)->required();
  tf->add_option("--source", source)->required();
  tf->add_option("--target", target)->required();
  tf->add_option("--unlabeled", unlabeled)->required();
  tf->add_option("--embeddings", embeddings)->required();
  tf->add_option("--out", o.out)->required();

  auto* ev = app.add_subcommand("evaluate", "Run the labeled-fraction experiment grid");
  ev->add_option("--config", o.config)->required();
  ev->add_option("--out", o.out)->required();

  auto* rp = app.add_subcommand("report", "Combine experiment summaries");
  rp->add_option("--runs", runs)->required();
  rp->add_option("--out", o.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }
  o.threads = threads;

  try {
    if (*gen) gen_data(o);
    else if (*emb) train_embeddings(o, corpus);
    else if (*tr) train(o, data, embeddings);
    else if (*st) selftrain(o, labeled, unlabeled, embeddings);
    else if (*tf) transfer(o, source, target, unlabeled, embeddings);
    else if (*ev) evaluate(o);
    else if (*rp) report(runs, o.out);
  } catch (const sstl::MissingInput& e) {
    return fail(2, "missing_input", e.what());
  } catch (const sstl::SchemaError& e) {
    return fail(2, "schema", e.what(), e.where());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
  return 0;
}
