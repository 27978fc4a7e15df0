#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "sstl/error.hpp"
#include "sstl/eval.hpp"
#include "sstl/experiment.hpp"
#include "sstl/linear.hpp"
#include "selftrain_properties.hpp"
#include "support.hpp"

using namespace sstl;
using namespace sstl::eval;
using namespace sstl::test;

namespace {

constexpr auto A = Label::Abnormal;
constexpr auto N = Label::Normal;

double boost_two_tailed(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

/// Classifier that always answers Abnormal.
std::unique_ptr<models::Classifier> always_abnormal() {
  auto lr = std::make_unique<models::LogisticRegression>(models::default_spec(models::Family::LR));
  lr->set_parameters({0.0}, 10.0);
  return lr;
}

struct ExperimentFixture {
  Dataset target, pool, source;
  models::FeatureStore features;

  ExperimentFixture() {
    auto inst = selftrain_instance(60, 60, 3, 1.5, 31);
    target = std::move(inst.labeled);
    pool = std::move(inst.pool);
    features = std::move(inst.features);
    auto blobs = gaussian_blobs(60, 3, 2.0, 1.0, 32);
    std::vector<Document> docs;
    for (std::size_t i = 0; i < blobs.reps.size(); ++i) {
      const std::string id = "s" + std::to_string(1000 + i);
      docs.push_back(corpus::make_document(id, "x", blobs.labels[i], "source"));
      features.add(id, blobs.reps[i]);
    }
    source = Dataset(std::move(docs), "source");
  }

  ExperimentData data() const { return {&target, &pool, &source, &features}; }

  ExperimentConfig config() const {
    ExperimentConfig cfg;
    cfg.k = 4;
    cfg.seed = 3;
    cfg.spec = models::default_spec(models::Family::LR, 5);
    cfg.spec.train.epochs = 60;
    cfg.selftrain.max_iterations = 4;
    cfg.selftrain.tau = 0.95;
    cfg.selftrain.fine_tune_cfg = {0.05, 8, 2};
    cfg.selftrain.seed = 9;
    return cfg;
  }
};

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<Label> gold{A, A, N, N};
  const auto c = confusion(std::vector<Label>{A, N, A, N}, gold);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);

  const std::vector<Label> mixed{A, N, A, N, N, A};
  const auto perfect = confusion(mixed, mixed);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);
  CHECK(perfect.tp == 3);

  const std::vector<Label> all_a(5, A), all_n(5, N);
  const auto miss = confusion(all_n, all_a);
  CHECK(miss.tp == 0);
  CHECK(miss.fn == 5);
  CHECK_THROWS_AS(confusion(all_n, gold), InvalidArgument);
}

TEST_CASE("metrics match closed forms on crafted confusion matrices") {
  const ConfusionCounts cases[] = {
      {1, 0, 0, 1},    {5, 0, 0, 5},   {0, 0, 0, 10},  {0, 3, 4, 3},   {10, 2, 3, 85},
      {7, 7, 7, 7},    {1, 9, 0, 0},   {0, 0, 6, 0},   {99, 1, 1, 99}, {3, 1, 0, 0},
      {40, 60, 0, 0},  {2, 0, 8, 10},  {13, 5, 11, 2}, {100, 0, 1, 0}, {1, 1, 1, 1},
      {250, 17, 9, 0}, {0, 1, 0, 0},   {6, 3, 2, 89},  {12, 0, 0, 0},  {8, 4, 16, 32}};
  for (const auto& c : cases) {
    const auto m = metrics_from_counts(c);
    const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn), tn = double(c.tn);
    const double p = c.tp + c.fp ? tp / (tp + fp) : 0.0;
    const double r = c.tp + c.fn ? tp / (tp + fn) : 0.0;
    const double f1 = c.tp ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    CHECK(std::abs(m.precision - p) < 1e-12);
    CHECK(std::abs(m.recall - r) < 1e-12);
    CHECK(std::abs(m.f1 - f1) < 1e-12);
    CHECK(std::abs(m.accuracy - (tp + tn) / (tp + fp + fn + tn)) < 1e-12);
    if (m.precision > 0 && m.recall > 0) {
      CHECK(std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) < 1e-12);
      CHECK(m.f1 <= std::sqrt(m.precision * m.recall) + 1e-12);
    }
  }
}

TEST_CASE("F1 of the reference precision and recall") {
  const double p = 0.9159, r = 0.9028;
  const double f1 = 2 * p * r / (p + r);
  CHECK(std::abs(f1 - 0.90930) < 5e-5);
  CHECK(std::abs(f1 - 0.9085) > 5e-4);
}

TEST_CASE("zero denominators give zero") {
  const auto m = metrics_from_counts({0, 0, 0, 10});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.accuracy == 1.0);
  CHECK(metrics_from_counts({}).accuracy == 0.0);
}

TEST_CASE("summaries use the sample standard deviation") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
  CHECK(summarize(std::vector<double>{0.7}).sd == 0.0);
}

TEST_CASE("constant Abnormal classifier under cross-validation") {
  const auto ds = labeled_dataset(60, 40);
  std::vector<std::vector<double>> values(100, std::vector<double>{0.0});
  const auto store = vector_store(ds, values);
  const auto r = cross_validate([](const Dataset&, std::size_t, std::uint64_t) { return always_abnormal(); },
                                store, ds, 10, 1);
  REQUIRE(r.folds.size() == 10);
  for (const auto& m : r.folds) {
    CHECK(m.recall == 1.0);
    CHECK(m.precision == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(m.accuracy == doctest::Approx(0.4).epsilon(1e-12));
  }
  CHECK(r.f1.sd == doctest::Approx(0.0));
}

TEST_CASE("majority-class accuracy equals the majority fraction") {
  const auto ds = labeled_dataset(70, 30);
  std::vector<std::vector<double>> values(100, std::vector<double>{0.0});
  const auto store = vector_store(ds, values);
  auto lr = std::make_unique<models::LogisticRegression>(models::default_spec(models::Family::LR));
  lr->set_parameters({0.0}, -10.0);
  CHECK(evaluate(*lr, store, ds).accuracy == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("cross-validation is deterministic and partitions the data") {
  ExperimentFixture fx;
  std::vector<std::string> seen;
  std::mutex mu;
  auto train = [&](const Dataset& tr, std::size_t, std::uint64_t fold_seed) {
    {
      std::lock_guard lock(mu);
      for (const auto& d : tr.documents()) seen.push_back(d.id);
    }
    auto c = models::make_classifier(models::default_spec(models::Family::LR, fold_seed));
    c->fit(fx.features.refs(tr), tr.labels());
    return c;
  };
  const auto a = cross_validate(train, fx.features, fx.target, 5, 7);
  const auto b = cross_validate(train, fx.features, fx.target, 5, 7, 3);
  REQUIRE(a.folds.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.folds[i].f1 == b.folds[i].f1);
    CHECK(a.folds[i].precision == b.folds[i].precision);
  }
  // Across k folds each document is in k - 1 training splits.
  std::map<std::string, int> counts;
  for (const auto& id : seen) ++counts[id];
  CHECK(counts.size() == fx.target.size());
  for (const auto& [id, n] : counts) CHECK(n == 2 * 4);

  double sum = 0.0;
  for (const auto& m : a.folds) sum += m.f1;
  CHECK(a.f1.mean == doctest::Approx(sum / 5).epsilon(1e-15));
  CHECK(a.values(&Metrics::f1).size() == 5);
}

TEST_CASE("cross-validation reports the failing fold") {
  ExperimentFixture fx;
  auto train = [&](const Dataset& tr, std::size_t fold, std::uint64_t) {
    if (fold == 2) throw InvalidArgument("boom");
    auto c = models::make_classifier(models::default_spec(models::Family::LR));
    c->fit(fx.features.refs(tr), tr.labels());
    return c;
  };
  try {
    cross_validate(train, fx.features, fx.target, 4, 1, 2);
    FAIL("expected a fold error");
  } catch (const FoldError& e) {
    CHECK(e.fold() == 2);
  }
}

// ---------------------------------------------------------------------------
// t-test

TEST_CASE("paired t-test on fixed differences") {
  const std::vector<double> a{1, 2, 3, 4}, zero(4, 0.0);
  const auto r = paired_ttest(a, zero);
  CHECK(r.degrees_of_freedom == 3);
  CHECK(r.t_statistic == doctest::Approx(2.5 / (std::sqrt(5.0 / 3.0) / 2.0)).epsilon(1e-12));
  CHECK(std::abs(r.t_statistic - 3.873) < 1e-3);
  CHECK(std::abs(r.p_value - boost_two_tailed(r.t_statistic, 3)) < 1e-3);
  CHECK(std::abs(r.p_value - 0.0305) < 1e-3);
  CHECK(r.significant_at_05);
}

TEST_CASE("t-test sd = 0 conventions") {
  const std::vector<double> a{0.8, 0.9, 0.7};
  const auto same = paired_ttest(a, a);
  CHECK(same.t_statistic == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK_FALSE(same.significant_at_05);
  const std::vector<double> base{1.0, 2.0, 3.0}, shifted{1.5, 2.5, 3.5};
  const auto c = paired_ttest(base, shifted);
  CHECK(c.p_value == 0.0);
  CHECK(c.significant_at_05);
  CHECK(std::isinf(c.t_statistic));
  CHECK(c.t_statistic < 0);
  CHECK_THROWS_AS(paired_ttest(std::vector<double>{1}, std::vector<double>{2}), InvalidArgument);
  CHECK_THROWS_AS(paired_ttest(a, std::vector<double>{1, 2}), InvalidArgument);
}

TEST_CASE("t-test antisymmetry") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(10), b(10);
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform();
    const auto ab = paired_ttest(a, b);
    const auto ba = paired_ttest(b, a);
    CHECK(ab.t_statistic == -ba.t_statistic);
    CHECK(ab.p_value == ba.p_value);
    CHECK(std::abs(ab.p_value - boost_two_tailed(ab.t_statistic, 9)) < 1e-9);
  }
}

TEST_CASE("Student t anchors") {
  for (double df : {1.0, 3.0, 10.0, 50.0}) CHECK(student_t_two_tailed(0.0, df) == 1.0);
  CHECK(std::abs(student_t_two_tailed(1.0, 10) - 0.3409) < 1e-3);
  CHECK(std::abs(student_t_two_tailed(2.228, 10) - 0.05) < 1e-3);
  for (double t : {0.1, 0.5, 1.3, 2.0, 4.0, 12.0})
    for (double df : {1.0, 2.0, 5.0, 9.0, 29.0})
      CHECK(std::abs(student_t_two_tailed(t, df) - boost_two_tailed(t, df)) < 1e-10);
  CHECK(student_t_two_tailed(INFINITY, 5) == 0.0);
}

TEST_CASE("incomplete beta edge values") {
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  CHECK(incomplete_beta(1, 1, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
  // I_x(a, b) = 1 - I_{1-x}(b, a).
  CHECK(incomplete_beta(2.5, 0.5, 0.3) ==
        doctest::Approx(1.0 - incomplete_beta(0.5, 2.5, 0.7)).epsilon(1e-12));
  CHECK_THROWS_AS(incomplete_beta(0, 1, 0.5), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Experiments

TEST_CASE("a supervised 100% experiment equals plain cross-validation") {
  ExperimentFixture fx;
  auto cfg = fx.config();
  cfg.modes = {Mode::Supervised};
  cfg.fractions = {1.0};
  const auto r = run_experiment(cfg, {&fx.target, nullptr, nullptr, &fx.features});
  REQUIRE(r.cells.size() == 1);
  const auto cv = cross_validate(
      [&](const Dataset& tr, std::size_t, std::uint64_t fold_seed) {
        auto spec = cfg.spec;
        spec.seed = derive_seed(cfg.spec.seed, fold_seed);
        auto c = models::make_classifier(spec);
        c->fit(fx.features.refs(tr), tr.labels());
        return c;
      },
      fx.features, fx.target, cfg.k, cfg.seed);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    CHECK(r.cells[0].results.folds[i].f1 == cv.folds[i].f1);
    CHECK(r.cells[0].results.folds[i].precision == cv.folds[i].precision);
  }
  CHECK_FALSE(r.cells[0].vs_supervised.has_value());
}

TEST_CASE("a 0% fraction needs transfer mode") {
  ExperimentFixture fx;
  auto cfg = fx.config();
  cfg.modes = {Mode::Supervised, Mode::SelfTrain};
  cfg.fractions = {0.0, 1.0};
  CHECK_THROWS_AS(run_experiment(cfg, fx.data()), InvalidArgument);
  cfg.fractions = {1.5};
  CHECK_THROWS_AS(run_experiment(cfg, fx.data()), InvalidArgument);
}

TEST_CASE("transfer at 0% emits one row") {
  ExperimentFixture fx;
  auto cfg = fx.config();
  cfg.modes = {Mode::Transfer};
  cfg.fractions = {0.0};
  const auto r = run_experiment(cfg, fx.data());
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].fraction == 0.0);
  CHECK(r.cells[0].results.folds.size() == cfg.k);
  CHECK(r.cells[0].results.f1.mean > 0.5);
}

TEST_CASE("full grid runs every mode, tests the comparisons and recomputes them") {
  ExperimentFixture fx;
  auto cfg = fx.config();
  cfg.fractions = {0.0, 0.5, 1.0};
  const auto r = run_experiment(cfg, fx.data());
  CHECK(r.cells.size() == 1 + 3 + 3);
  const Cell* sup = r.find(Mode::Supervised, 1.0);
  REQUIRE(sup);
  for (const auto& cell : r.cells) {
    if (cell.mode != Mode::Supervised) CHECK(cell.logs.size() == cfg.k);
    if (&cell == sup) continue;
    REQUIRE(cell.vs_supervised.has_value());
    const auto t = paired_ttest(cell.results.values(&Metrics::f1), sup->results.values(&Metrics::f1));
    CHECK(t.p_value == cell.vs_supervised->p_value);
    const std::string m = marker(cell, cell.vs_supervised, sup, "*");
    CHECK(m == (t.p_value < 0.05 && cell.results.f1.mean > sup->results.f1.mean ? "*" : ""));
    if (cell.mode == Mode::Transfer && cell.fraction > 0.0) {
      const Cell* st = r.find(Mode::SelfTrain, cell.fraction);
      REQUIRE(st);
      REQUIRE(cell.vs_selftrain.has_value());
      CHECK(cell.vs_selftrain->p_value ==
            paired_ttest(cell.results.values(&Metrics::f1), st->results.values(&Metrics::f1)).p_value);
    } else {
      CHECK_FALSE(cell.vs_selftrain.has_value());
    }
  }
}

TEST_CASE("marker semantics") {
  Cell better, worse;
  better.results.f1.mean = 0.9;
  worse.results.f1.mean = 0.8;
  TTestResult sig{3.0, 9, 0.01, true}, not_sig{1.0, 9, 0.3, false};
  CHECK(marker(better, sig, &worse, "*") == "*");
  CHECK(marker(worse, sig, &better, "*").empty());
  CHECK(marker(better, not_sig, &worse, "*").empty());
  CHECK(marker(better, std::nullopt, &worse, "*").empty());
}

TEST_CASE("report files are byte-identical across runs and thread counts") {
  ExperimentFixture fx;
  TempDir dir("eval");
  auto cfg = fx.config();
  cfg.fractions = {0.0, 0.5, 1.0};
  std::vector<std::string> outputs[2];
  for (std::size_t threads : {1, 3}) {
    cfg.threads = threads;
    const auto r = run_experiment(cfg, fx.data());
    const auto tag = std::to_string(threads);
    write_results_csv(r, dir / ("results" + tag + ".csv"));
    write_summary_csv(r, dir / ("summary" + tag + ".csv"));
    write_logs_jsonl(r, dir / ("logs" + tag + ".jsonl"));
    auto& out = outputs[threads == 1 ? 0 : 1];
    for (const char* name : {"results", "summary", "logs"})
      out.push_back(read_file(dir / (std::string(name) + tag + (name[0] == 'l' ? ".jsonl" : ".csv"))));
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[0][0].rfind("system,fraction,fold,precision,recall,f1,accuracy\n", 0) == 0);
  CHECK(outputs[0][1].find("sig_vs_supervised,sig_vs_selftrain") != std::string::npos);
}

TEST_CASE("number formatting") {
  CHECK(format_fraction(0.7) == "0.70");
  CHECK(format_fraction(1.0) == "1.00");
  CHECK(format_number(0.5) == "0.500000");
}
