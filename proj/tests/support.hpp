#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sstl/corpus.hpp"
#include "sstl/embedding.hpp"
#include "sstl/models.hpp"
#include "sstl/rng.hpp"

namespace sstl::test {

namespace fs = std::filesystem;
using corpus::Dataset;
using corpus::Document;
using corpus::Label;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("sstl-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Labeled dataset with the given class counts; ids "d000", "d001", ...
inline Dataset labeled_dataset(std::size_t normal, std::size_t abnormal,
                               const std::string& domain = "target") {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < normal + abnormal; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "d%03zu", i);
    const Label l = i < normal ? Label::Normal : Label::Abnormal;
    docs.push_back(corpus::make_document(id, l == Label::Normal ? "clear" : "fracture", l, domain));
  }
  return Dataset(std::move(docs), domain);
}

/// Mean-vector features with the given per-document values, keyed by the
/// documents of ds in order.
inline models::FeatureStore vector_store(const Dataset& ds,
                                         const std::vector<std::vector<double>>& values) {
  models::FeatureStore store;
  for (std::size_t i = 0; i < ds.size(); ++i)
    store.add(ds[i].id, embedding::DocVector{values[i], false});
  return store;
}

/// Two Gaussian blobs in `dim` dimensions, separated along every axis.
struct Blobs {
  std::vector<models::Representation> reps;
  std::vector<Label> labels;

  models::FeatureRefs refs() const { return models::FeatureRefs(reps); }
};

inline Blobs gaussian_blobs(std::size_t n, std::size_t dim, double separation, double sd,
                            std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  Blobs b;
  for (std::size_t i = 0; i < n; ++i) {
    const Label l = i % 2 == 0 ? Label::Normal : Label::Abnormal;
    const double centre = l == Label::Abnormal ? separation / 2 : -separation / 2;
    std::vector<double> x(dim);
    for (auto& v : x) v = centre + noise(eng);
    b.reps.emplace_back(embedding::DocVector{x, false});
    b.labels.push_back(l);
  }
  return b;
}

/// Random token matrices whose class is signalled by a planted pattern.
inline Blobs token_matrices(std::size_t n, std::size_t max_len, std::size_t dim,
                            std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_int_distribution<std::size_t> len(3, max_len);
  Blobs b;
  for (std::size_t i = 0; i < n; ++i) {
    const Label l = i % 2 == 0 ? Label::Normal : Label::Abnormal;
    embedding::TokenMatrix m;
    m.max_len = max_len;
    m.dim = dim;
    m.true_length = len(eng);
    m.rows.assign(max_len * dim, 0.0);
    for (std::size_t t = 0; t < m.true_length; ++t)
      for (std::size_t d = 0; d < dim; ++d) m.rows[t * dim + d] = noise(eng);
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, m.true_length - 1)(eng);
    for (std::size_t d = 0; d < dim; ++d)
      m.rows[pos * dim + d] += (l == Label::Abnormal ? 1.0 : -1.0) * (d % 2 == 0 ? 1.0 : 0.5);
    b.reps.emplace_back(std::move(m));
    b.labels.push_back(l);
  }
  return b;
}

/// Small CNN spec for fast tests.
inline models::ClassifierSpec tiny_cnn(std::vector<std::size_t> sizes, std::size_t filters,
                                       std::uint64_t seed) {
  auto spec = models::default_spec(models::Family::CNN, seed);
  auto& p = std::get<models::CnnParams>(spec.hyperparameters);
  p.filter_sizes = std::move(sizes);
  p.filters_per_size = filters;
  return spec;
}

/// Sentences drawn from one of two disjoint 50-word topics.
inline std::vector<std::vector<std::string>> two_topic_corpus(std::size_t sentences, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> out;
  for (std::size_t s = 0; s < sentences; ++s) {
    const char* prefix = s % 2 == 0 ? "alpha" : "beta";
    std::vector<std::string> sent;
    for (int t = 0; t < 8; ++t) sent.push_back(prefix + std::to_string(rng.below(50)));
    out.push_back(std::move(sent));
  }
  return out;
}

/// Mean intra-topic minus mean inter-topic cosine, topics told apart by the
/// first letter.
inline double topic_gap(const embedding::EmbeddingModel& m) {
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      const bool same = m.words()[a][0] == m.words()[b][0];
      (same ? intra : inter) += m.cosine(a, b);
      ++(same ? ni : nx);
    }
  return intra / ni - inter / nx;
}

}  // namespace sstl::test
