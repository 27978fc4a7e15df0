#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sstl::corpus {

/// Binary report label. Abnormal is the positive class.
enum class Label : int { Normal = 0, Abnormal = 1 };

constexpr std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }
std::string_view to_string(Label l);
std::optional<Label> parse_label(std::string_view s);

/// Lowercases and splits on maximal runs of characters outside [a-z0-9].
std::vector<std::string> tokenize(std::string_view text);

struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::optional<Label> label;
  std::string domain;
};

/// Builds a document whose tokens are tokenize(text).
Document make_document(std::string id, std::string text,
                       std::optional<Label> label, std::string domain);

/// Ordered collection of documents with unique ids. Either every document is
/// labeled or none is; the empty dataset counts as both.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Document> documents, std::string domain);

  const std::vector<Document>& documents() const { return documents_; }
  const Document& operator[](std::size_t i) const { return documents_[i]; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const std::string& domain() const { return domain_; }

  bool is_labeled() const;
  bool is_unlabeled() const;

  /// Per-class counts indexed by index_of(Label). Unlabeled documents are
  /// not counted.
  std::array<std::size_t, 2> class_counts() const;
  std::vector<Label> labels() const;

  /// Documents at the given positions, in the given order.
  Dataset subset(std::span<const std::size_t> positions) const;
  Dataset without_labels() const;

  /// Appends documents, enforcing id uniqueness and label homogeneity.
  void append(std::span<const Document> docs);

 private:
  std::vector<Document> documents_;
  std::string domain_;
};

Dataset load_jsonl(const std::filesystem::path& path);
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

/// Per class, round-half-up(fraction * class_count) documents drawn uniformly
/// without replacement. Original document order is preserved.
Dataset stratified_subsample(const Dataset& ds, double fraction,
                             std::uint64_t seed);

/// Stratified two-way split. `selected` receives round-half-up(fraction *
/// class_count) documents of each class, `rest` the remainder; both keep the
/// original order. Fraction may be 0.
struct Split {
  Dataset selected;
  Dataset rest;
};
Split stratified_split(const Dataset& ds, double fraction, std::uint64_t seed);

struct Fold {
  Dataset train;
  Dataset test;
};

/// k stratified folds. Test folds partition ds, and per-class fold sizes
/// differ by at most one.
std::vector<Fold> stratified_kfold(const Dataset& ds, std::size_t k,
                                   std::uint64_t seed);

/// Round half up, used wherever a fraction of a count is taken.
std::size_t round_half_up(double x);

// ---------------------------------------------------------------------------
// Synthetic two-domain corpus

struct SyntheticConfig {
  std::size_t n_labeled_target = 1480;
  std::size_t n_unlabeled = 10000;
  std::size_t n_labeled_source = 1480;
  double abnormal_fraction = 0.42;
  std::size_t vocab_size_per_class = 60;
  std::size_t background_vocab_size = 400;
  /// Probability that a token is drawn from the class-indicative vocabulary
  /// rather than the shared background.
  double indicative_rate = 0.12;
  double domain_shift = 0.3;
  double negation_rate = 0.2;
  std::size_t doc_length_mean = 30;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticCorpus {
  Dataset target_labeled;
  Dataset target_unlabeled;
  /// target_unlabeled with ground-truth labels, for oracle evaluation only.
  Dataset target_unlabeled_truth;
  Dataset source_labeled;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

}  // namespace sstl::corpus
