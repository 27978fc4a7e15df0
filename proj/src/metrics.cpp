#include <cmath>

#include "sstl/eval.hpp"

namespace sstl::eval {

ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> gold) {
  if (predictions.size() != gold.size())
    throw InvalidArgument("confusion: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(gold.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] == Label::Abnormal;
    const bool g = gold[i] == Label::Abnormal;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {
double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.precision = ratio(double(c.tp), double(c.tp + c.fp));
  m.recall = ratio(double(c.tp), double(c.tp + c.fn));
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.accuracy = ratio(double(c.tp + c.tn), double(c.total()));
  return m;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

FoldResults FoldResults::from_folds(std::vector<Metrics> folds) {
  FoldResults r;
  r.folds = std::move(folds);
  r.precision = summarize(r.values(&Metrics::precision));
  r.recall = summarize(r.values(&Metrics::recall));
  r.f1 = summarize(r.values(&Metrics::f1));
  r.accuracy = summarize(r.values(&Metrics::accuracy));
  return r;
}

std::vector<double> FoldResults::values(double Metrics::*field) const {
  std::vector<double> out;
  out.reserve(folds.size());
  for (const auto& m : folds) out.push_back(m.*field);
  return out;
}

}  // namespace sstl::eval
