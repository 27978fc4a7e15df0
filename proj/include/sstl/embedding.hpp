#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sstl/corpus.hpp"

namespace sstl::embedding {

/// Word vectors, row-major |vocab| x dim. Immutable once built.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::vector<std::string> words, std::size_t dim,
                 std::vector<double> vectors, nlohmann::json metadata = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<double>& data() const { return vectors_; }
  const nlohmann::json& metadata() const { return metadata_; }

  std::optional<std::size_t> index_of(std::string_view word) const;
  std::span<const double> vector(std::size_t index) const {
    return {vectors_.data() + index * dim_, dim_};
  }
  /// Null when the word is out of vocabulary.
  const double* find(std::string_view word) const;

  double cosine(std::size_t a, std::size_t b) const;

 private:
  std::vector<std::string> words_;
  std::size_t dim_ = 0;
  std::vector<double> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  nlohmann::json metadata_;
};

struct SkipgramConfig {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Skip-gram with negative sampling. Per-epoch mean loss is recorded under
/// metadata["epoch_loss"].
EmbeddingModel train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const SkipgramConfig& cfg);

/// Text format: "<vocab_size> <dim>" header, then "<word> <v1> ... <v_dim>"
/// with fixed 6-decimal components.
void save_embeddings(const EmbeddingModel& m, const std::filesystem::path& path);
EmbeddingModel load_embeddings(const std::filesystem::path& path);

struct DocVector {
  std::vector<double> values;
  bool oov_only = false;
};

/// max_len x dim rows, zero beyond true_length.
struct TokenMatrix {
  std::size_t max_len = 0;
  std::size_t dim = 0;
  std::size_t true_length = 0;
  std::vector<double> rows;

  std::span<const double> row(std::size_t i) const {
    return {rows.data() + i * dim, dim};
  }
};

/// Smallest admissible max_len: the widest convolution filter.
inline constexpr std::size_t kMinTokenMatrixLength = 15;

/// Mean of the in-vocabulary token vectors; all zeros with oov_only set when
/// no token is known.
DocVector doc_mean_vector(const corpus::Document& doc, const EmbeddingModel& m);

/// Token vectors in order, head-truncated to max_len, OOV tokens as zero rows.
TokenMatrix doc_token_matrix(const corpus::Document& doc, const EmbeddingModel& m,
                             std::size_t max_len);

/// 95th percentile of document token counts, never below 15.
std::size_t default_max_len(std::span<const corpus::Document> docs);

}  // namespace sstl::embedding
