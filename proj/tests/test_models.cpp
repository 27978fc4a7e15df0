#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sstl/cnn.hpp"
#include "sstl/error.hpp"
#include "sstl/eval.hpp"
#include "sstl/grid_search.hpp"
#include "sstl/linear.hpp"
#include "sstl/naive_bayes.hpp"
#include "sstl/random_forest.hpp"
#include "support.hpp"

using namespace sstl;
using namespace sstl::models;
using namespace sstl::test;

namespace {

const Family kVectorFamilies[] = {Family::SVM, Family::SGD, Family::NB, Family::RF, Family::LR};
const Family kAllFamilies[] = {Family::SVM, Family::SGD, Family::NB,
                               Family::RF,  Family::LR,  Family::CNN};

Blobs inputs_for(Family f, std::size_t n, std::uint64_t seed) {
  return f == Family::CNN ? token_matrices(n, 15, 4, seed) : gaussian_blobs(n, 5, 2.0, 1.0, seed);
}

ClassifierSpec small_spec(Family f, std::uint64_t seed) {
  if (f == Family::CNN) return tiny_cnn({2, 3}, 4, seed);
  auto spec = default_spec(f, seed);
  if (f == Family::RF) std::get<RfParams>(spec.hyperparameters).n_trees = 15;
  return spec;
}

double training_accuracy(const Classifier& c, const Blobs& b) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < b.reps.size(); ++i)
    correct += eval::predicted_label(c.predict_proba(b.reps[i])) == b.labels[i];
  return double(correct) / double(b.reps.size());
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("family names") {
  for (Family f : kAllFamilies) CHECK(parse_family(to_string(f)) == f);
  CHECK_FALSE(parse_family("kernel-svm").has_value());
}

TEST_CASE("fine-tune support by family") {
  for (Family f : kAllFamilies) {
    const bool expected = f != Family::NB && f != Family::RF;
    CHECK(make_classifier(default_spec(f))->supports_fine_tune() == expected);
  }
}

TEST_CASE("default CNN architecture and schedule") {
  const auto spec = default_spec(Family::CNN);
  const auto& p = std::get<CnnParams>(spec.hyperparameters);
  CHECK(p.filter_sizes == std::vector<std::size_t>{10, 15});
  CHECK(p.filters_per_size == 400);
  CHECK(p.dropout == 0.7);
  CHECK(spec.train.learning_rate == 0.0005);
  CHECK(spec.train.batch_size == 16);
  CHECK(spec.train.epochs == 10);
  const auto ft = default_fine_tune_config();
  CHECK(ft.epochs == 5);
  CHECK(ft.learning_rate == 0.0005);
}

TEST_CASE("spec JSON round-trip and strictness") {
  for (Family f : kAllFamilies) {
    const auto spec = small_spec(f, 17);
    CHECK(to_json(spec_from_json(to_json(spec))) == to_json(spec));
  }
  nlohmann::json j = to_json(default_spec(Family::CNN));
  j["hyperparameters"]["dropuot"] = 0.5;
  try {
    spec_from_json(j, "/classifier");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.where() == "/classifier/hyperparameters/dropuot");
  }
  j = to_json(default_spec(Family::CNN));
  j["hyperparameters"]["dropout"] = 1.0;
  CHECK_THROWS_AS(spec_from_json(j), SchemaError);
  j = to_json(default_spec(Family::LR));
  j["family"] = "perceptron";
  CHECK_THROWS_AS(spec_from_json(j), SchemaError);
  j = to_json(default_spec(Family::LR));
  j["train"]["learning_rate"] = -1.0;
  CHECK_THROWS_AS(spec_from_json(j), SchemaError);
}

TEST_CASE("fit preconditions") {
  for (Family f : kAllFamilies) {
    auto c = make_classifier(small_spec(f, 1));
    auto b = inputs_for(f, 20, 1);
    CHECK_THROWS_AS(c->predict_proba(b.reps[0]), NotTrained);
    std::vector<Label> one_class(b.labels.size(), Label::Abnormal);
    CHECK_THROWS_AS(c->fit(b.refs(), one_class), InvalidArgument);
    std::vector<Label> short_labels(b.labels.begin(), b.labels.begin() + 3);
    CHECK_THROWS_AS(c->fit(b.refs(), short_labels), InvalidArgument);
    const auto wrong = inputs_for(f == Family::CNN ? Family::LR : Family::CNN, 20, 1);
    CHECK_THROWS_AS(c->fit(wrong.refs(), wrong.labels), InvalidArgument);
  }
}

TEST_CASE("predict_proba stays in [0, 1] on arbitrary finite inputs") {
  for (Family f : kAllFamilies) {
    auto c = make_classifier(small_spec(f, 2));
    auto b = inputs_for(f, 40, 2);
    c->fit(b.refs(), b.labels);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const double scale = std::pow(10.0, rng.uniform(-3.0, 6.0));
      models::Representation r = b.reps[trial % b.reps.size()];
      if (auto* v = std::get_if<embedding::DocVector>(&r)) {
        for (auto& x : v->values) x = rng.uniform(-scale, scale);
      } else {
        auto& m = std::get<embedding::TokenMatrix>(r);
        for (std::size_t i = 0; i < m.true_length * m.dim; ++i) m.rows[i] = rng.uniform(-scale, scale);
      }
      const double p = c->predict_proba(r);
      CHECK(std::isfinite(p));
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK((1.0 - p) + p == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("training is deterministic per seed") {
  for (Family f : kAllFamilies) {
    auto b = inputs_for(f, 30, 3);
    auto a = make_classifier(small_spec(f, 9));
    auto c = make_classifier(small_spec(f, 9));
    a->fit(b.refs(), b.labels);
    c->fit(b.refs(), b.labels);
    CHECK(a->state() == c->state());
    CHECK(a->predict_proba(b.refs()) == c->predict_proba(b.refs()));
  }
}

TEST_CASE("training summary records loss and accuracy") {
  for (Family f : kAllFamilies) {
    auto b = inputs_for(f, 40, 4);
    auto c = make_classifier(small_spec(f, 4));
    c->fit(b.refs(), b.labels);
    const auto& s = c->training_summary();
    CHECK(std::isfinite(s.final_loss));
    CHECK(s.accuracy >= 0.0);
    CHECK(s.accuracy <= 1.0);
  }
}

TEST_CASE("model persistence round-trip") {
  TempDir dir("models");
  for (Family f : kAllFamilies) {
    auto b = inputs_for(f, 30, 6);
    auto c = make_classifier(small_spec(f, 6));
    c->fit(b.refs(), b.labels);
    const auto path = dir / (std::string(to_string(f)) + ".json");
    save_model(*c, path);
    auto back = load_model(path);
    CHECK(back->family() == f);
    CHECK(back->trained());
    for (std::size_t i = 0; i < b.reps.size(); ++i) {
      const double p = c->predict_proba(b.reps[i]);
      if (f == Family::CNN)
        CHECK(back->predict_proba(b.reps[i]) == doctest::Approx(p).epsilon(1e-6));
      else
        CHECK(back->predict_proba(b.reps[i]) == p);
    }
  }
  auto j = nlohmann::json::parse(read_file(dir / "lr.json"));
  CHECK(j.at("format_version") == 1);
  j["format_version"] = 2;
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
}

TEST_CASE("CNN weights persist with nine significant digits") {
  CHECK(round_significant(0.123456789123, 9) == 0.123456789);
  CHECK(round_significant(-98765.43210987, 9) == -98765.4321);
  CHECK(round_significant(0.0, 9) == 0.0);
}

TEST_CASE("logistic regression separates separable points within 500 epochs") {
  auto b = gaussian_blobs(200, 2, 6.0, 0.5, 11);
  // Every point lies on its own side of the x1 + x2 = 0 line with margin.
  for (std::size_t i = 0; i < b.reps.size(); ++i) {
    const auto& x = std::get<embedding::DocVector>(b.reps[i]).values;
    const double side = (x[0] + x[1]) * (b.labels[i] == corpus::Label::Abnormal ? 1 : -1);
    REQUIRE(side > 0.5);
  }
  auto spec = default_spec(Family::LR, 1);
  spec.train.epochs = 500;
  LogisticRegression lr(spec);
  lr.fit(b.refs(), b.labels);
  CHECK(training_accuracy(lr, b) == 1.0);
}

TEST_CASE("logistic regression with zero parameters predicts one half") {
  LogisticRegression lr(default_spec(Family::LR));
  lr.set_parameters({0.0, 0.0, 0.0}, 0.0);
  CHECK(lr.predict_proba(embedding::DocVector{{3.0, -1.0, 8.0}, false}) == 0.5);
}

TEST_CASE("LR and SGD log-loss gradients match central differences") {
  auto b = gaussian_blobs(30, 4, 1.0, 1.0, 12);
  Rng rng(3);
  std::vector<double> w(4);
  for (auto& x : w) x = rng.uniform(-1, 1);
  for (Family f : {Family::LR, Family::SGD}) {
    auto c = make_classifier(default_spec(f));
    auto& lin = dynamic_cast<LinearModel&>(*c);
    lin.set_parameters(w, 0.3);
    auto loss_at = [&](std::vector<double> ww, double bb) {
      lin.set_parameters(std::move(ww), bb);
      return f == Family::LR ? dynamic_cast<LogisticRegression&>(lin).loss(b.refs(), b.labels)
                             : dynamic_cast<SgdClassifier&>(lin).loss(b.refs(), b.labels);
    };
    const auto analytic = f == Family::LR
                              ? dynamic_cast<LogisticRegression&>(lin).gradient(b.refs(), b.labels)
                              : dynamic_cast<SgdClassifier&>(lin).gradient(b.refs(), b.labels);
    std::vector<double> numeric(5);
    const double h = 1e-5;
    for (std::size_t k = 0; k < 5; ++k) {
      auto wp = w, wm = w;
      double bp = 0.3, bm = 0.3;
      if (k < 4) {
        wp[k] += h;
        wm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      numeric[k] = (loss_at(wp, bp) - loss_at(wm, bm)) / (2 * h);
    }
    CHECK(max_relative_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("linear SVM margins are non-negative on separable data") {
  auto b = gaussian_blobs(100, 3, 6.0, 0.5, 13);
  auto spec = default_spec(Family::SVM, 2);
  LinearSvm svm(spec);
  svm.fit(b.refs(), b.labels);
  for (std::size_t i = 0; i < b.reps.size(); ++i) {
    const double y = b.labels[i] == corpus::Label::Abnormal ? 1.0 : -1.0;
    CHECK(y * svm.decision_value(b.reps[i]) >= 0.0);
  }
  CHECK(svm.link_slope() > 0.0);
}

TEST_CASE("logistic link fit recovers a known slope") {
  std::vector<double> f;
  std::vector<corpus::Label> y;
  Rng rng(8);
  for (int i = 0; i < 4000; ++i) {
    const double x = rng.uniform(-4, 4);
    f.push_back(x);
    y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-(2.0 * x - 0.5))) ? corpus::Label::Abnormal
                                                                          : corpus::Label::Normal);
  }
  const auto [a, c] = fit_logistic_link(f, y);
  CHECK(a == doctest::Approx(2.0).epsilon(0.15));
  CHECK(c == doctest::Approx(-0.5).epsilon(0.3));
}

TEST_CASE("Gaussian NB symmetric posterior") {
  std::vector<models::Representation> reps;
  for (double x : {-1.0, -1.0, 1.0, 1.0}) reps.emplace_back(embedding::DocVector{{x}, false});
  std::vector<corpus::Label> labels{corpus::Label::Normal, corpus::Label::Normal,
                                    corpus::Label::Abnormal, corpus::Label::Abnormal};
  GaussianNb nb(default_spec(Family::NB));
  nb.fit(FeatureRefs(reps), labels);
  CHECK(nb.predict_proba(embedding::DocVector{{0.0}, false}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("Gaussian NB closed-form posterior") {
  GaussianNb nb(default_spec(Family::NB));
  nb.set_parameters({0.5, 0.5}, {std::vector<double>{-1.0}, std::vector<double>{1.0}},
                    {std::vector<double>{1.0}, std::vector<double>{1.0}});
  // log N(0.5; 1, 1) - log N(0.5; -1, 1) = (2.25 - 0.25) / 2 = 1.
  const double expected = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(nb.predict_proba(embedding::DocVector{{0.5}, false}) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("random forest probability is the vote fraction") {
  RandomForest rf(default_spec(Family::RF));
  auto leaf = [](corpus::Label l) { return DecisionTree{TreeNode{-1, 0.0, -1, -1, l}}; };
  rf.set_trees({leaf(corpus::Label::Abnormal), leaf(corpus::Label::Abnormal),
                leaf(corpus::Label::Normal)});
  CHECK(rf.predict_proba(embedding::DocVector{{0.0}, false}) == doctest::Approx(2.0 / 3.0));

  DecisionTree split{TreeNode{0, 0.5, 1, 2, corpus::Label::Normal},
                     TreeNode{-1, 0.0, -1, -1, corpus::Label::Normal},
                     TreeNode{-1, 0.0, -1, -1, corpus::Label::Abnormal}};
  rf.set_trees({split});
  CHECK(rf.predict_proba(embedding::DocVector{{0.2}, false}) == 0.0);
  CHECK(rf.predict_proba(embedding::DocVector{{0.9}, false}) == 1.0);
  DecisionTree cyclic{TreeNode{0, 0.5, 0, 0, corpus::Label::Normal}};
  CHECK_THROWS_AS(rf.set_trees({cyclic}), InvalidArgument);
}

TEST_CASE("single unbagged tree fits distinct training points exactly") {
  auto b = gaussian_blobs(80, 4, 0.5, 1.0, 14);
  auto spec = default_spec(Family::RF, 3);
  auto& p = std::get<RfParams>(spec.hyperparameters);
  p.n_trees = 1;
  p.bootstrap = false;
  RandomForest rf(spec);
  rf.fit(b.refs(), b.labels);
  CHECK(training_accuracy(rf, b) == 1.0);
}

TEST_CASE("fine_tune with zero epochs leaves weights unchanged") {
  for (Family f : {Family::LR, Family::SGD, Family::SVM, Family::CNN}) {
    auto b = inputs_for(f, 30, 15);
    auto c = make_classifier(small_spec(f, 15));
    c->fit(b.refs(), b.labels);
    const auto before = c->state();
    TrainConfig cfg = default_fine_tune_config();
    cfg.epochs = 0;
    c->fine_tune(b.refs(), b.labels, cfg);
    CHECK(c->state() == before);
  }
}

TEST_CASE("fine_tune on the training set does not raise the training loss") {
  auto b = gaussian_blobs(60, 5, 1.5, 1.0, 16);
  LogisticRegression lr(default_spec(Family::LR, 1));
  lr.fit(b.refs(), b.labels);
  const double before = lr.loss(b.refs(), b.labels);
  lr.fine_tune(b.refs(), b.labels, default_fine_tune_config());
  CHECK(lr.loss(b.refs(), b.labels) <= before + 1e-6);

  auto t = token_matrices(64, 15, 4, 16);
  CnnClassifier cnn(tiny_cnn({2, 3}, 4, 1));
  cnn.fit(t.refs(), t.labels);
  const double cnn_before = cnn.loss(t.refs(), t.labels);
  cnn.fine_tune(t.refs(), t.labels, default_fine_tune_config());
  CHECK(cnn.loss(t.refs(), t.labels) <= cnn_before + 1e-6);
}

TEST_CASE("fine_tune is unsupported for NB and RF and needs a trained model") {
  for (Family f : {Family::NB, Family::RF}) {
    auto b = inputs_for(f, 20, 17);
    auto c = make_classifier(small_spec(f, 1));
    c->fit(b.refs(), b.labels);
    CHECK_THROWS_AS(c->fine_tune(b.refs(), b.labels, default_fine_tune_config()),
                    UnsupportedOperation);
  }
  auto b = inputs_for(Family::LR, 20, 17);
  auto c = make_classifier(default_spec(Family::LR));
  CHECK_THROWS_AS(c->fine_tune(b.refs(), b.labels, default_fine_tune_config()), NotTrained);
}

TEST_CASE("clone is independent of the original") {
  auto b = inputs_for(Family::LR, 30, 18);
  auto c = make_classifier(default_spec(Family::LR));
  c->fit(b.refs(), b.labels);
  auto copy = c->clone();
  const auto before = copy->state();
  c->fine_tune(b.refs(), b.labels, default_fine_tune_config());
  CHECK(copy->state() == before);
  CHECK(c->state() != before);
}

// ---------------------------------------------------------------------------
// Grid search

namespace {

struct GridFixture {
  Dataset ds;
  FeatureStore features;

  GridFixture() : ds(labeled_dataset(40, 40)) {
    auto blobs = gaussian_blobs(80, 3, 1.5, 1.0, 21);
    std::vector<std::vector<double>> values(80);
    // labeled_dataset puts the 40 normals first; blobs alternate classes.
    std::size_t n = 0, a = 40;
    for (std::size_t i = 0; i < 80; ++i) {
      auto v = std::get<embedding::DocVector>(blobs.reps[i]).values;
      values[blobs.labels[i] == corpus::Label::Normal ? n++ : a++] = v;
    }
    features = vector_store(ds, values);
  }
};

double cv_score(const ClassifierSpec& spec, const GridFixture& g, std::size_t k,
                std::uint64_t seed) {
  return eval::cross_validate(
             [&](const Dataset& train, std::size_t, std::uint64_t fold_seed) {
               auto s = spec;
               s.seed = derive_seed(spec.seed, fold_seed);
               auto c = make_classifier(s);
               c->fit(g.features.refs(train), train.labels());
               return c;
             },
             g.features, g.ds, k, seed)
      .f1.mean;
}

}  // namespace

TEST_CASE("grid search over a single point returns it") {
  GridFixture g;
  Grid grid{{"l2", {0.01}}};
  const auto r = grid_search(default_spec(Family::LR), grid, g.ds, 4, 1, g.features);
  CHECK(std::get<LrParams>(r.best.hyperparameters).l2 == 0.01);
  CHECK(r.points.size() == 1);
}

TEST_CASE("grid search avoids a degenerate learning rate") {
  GridFixture g;
  Grid grid{{"learning_rate", {0.0, 0.5}}};
  const auto r = grid_search(default_spec(Family::LR), grid, g.ds, 4, 1, g.features);
  CHECK(r.best.train.learning_rate == 0.5);
  CHECK(r.points[0].score < r.points[1].score);
}

TEST_CASE("grid search picks the argmax of independently recomputed scores") {
  GridFixture g;
  Grid grid{{"epochs", {2, 50}}, {"learning_rate", {0.01, 1.0}}};
  const auto base = default_spec(Family::LR, 4);
  const auto r = grid_search(base, grid, g.ds, 4, 2, g.features);
  REQUIRE(r.points.size() == 4);
  // Sorted keys, last key fastest: (2, .01) (2, 1) (50, .01) (50, 1).
  const std::pair<std::size_t, double> order[] = {{2, 0.01}, {2, 1.0}, {50, 0.01}, {50, 1.0}};
  std::size_t best = 0;
  double best_score = -1;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.points[i].spec.train.epochs == order[i].first);
    CHECK(r.points[i].spec.train.learning_rate == order[i].second);
    auto spec = base;
    spec.train.epochs = order[i].first;
    spec.train.learning_rate = order[i].second;
    const double s = cv_score(spec, g, 4, 2);
    CHECK(s == r.points[i].score);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  CHECK(to_json(r.best) == to_json(r.points[best].spec));
}

TEST_CASE("grid search rejects invalid grids") {
  GridFixture g;
  CHECK_THROWS_AS(grid_search(default_spec(Family::LR), {}, g.ds, 4, 1, g.features),
                  InvalidArgument);
  CHECK_THROWS_AS(
      grid_search(default_spec(Family::LR), {{"l2", {-1.0}}}, g.ds, 4, 1, g.features),
      SchemaError);
  CHECK_THROWS_AS(
      grid_search(default_spec(Family::LR), {{"depth", {3}}}, g.ds, 4, 1, g.features),
      SchemaError);
}
