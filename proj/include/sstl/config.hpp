#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sstl/corpus.hpp"
#include "sstl/embedding.hpp"
#include "sstl/experiment.hpp"
#include "sstl/grid_search.hpp"
#include "sstl/models.hpp"
#include "sstl/selftrain.hpp"

namespace sstl::cli {

inline constexpr int kConfigVersion = 1;

/// Input files of the evaluate command. Empty paths are absent; without
/// embeddings, a skip-gram model is trained on all listed documents.
struct ExperimentPaths {
  std::string target;
  std::string unlabeled;
  std::string source;
  std::string embeddings;
};

/// One JSON document configures every command. Each section's seed defaults
/// to the top-level seed.
struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  corpus::SyntheticConfig synthetic;
  embedding::SkipgramConfig skipgram;
  models::ClassifierSpec classifier;
  /// Token-matrix length; 0 picks the 95th-percentile default.
  std::size_t max_len = 0;
  selftrain::SelfTrainConfig selftrain;
  /// Share of the target labels used by the transfer command.
  double target_fraction = 1.0;
  eval::ExperimentConfig experiment;
  ExperimentPaths paths;
  /// Optional search run by the train command before the final fit.
  std::optional<models::Grid> grid;
  std::size_t grid_k = 5;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config(const std::filesystem::path& path);
/// Fully resolved configuration, defaults included.
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace sstl::cli
