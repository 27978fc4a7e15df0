#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sstl/eval.hpp"
#include "sstl/selftrain.hpp"

namespace sstl::eval {

enum class Mode { Supervised, SelfTrain, Transfer };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct ExperimentConfig {
  std::vector<Mode> modes{Mode::Supervised, Mode::SelfTrain, Mode::Transfer};
  std::vector<double> fractions{0.0, 0.3, 0.5, 0.7, 1.0};
  std::size_t k = 10;
  std::uint64_t seed = 0;
  models::ClassifierSpec spec;
  selftrain::SelfTrainConfig selftrain;
  std::size_t threads = 1;

  void validate() const;
};

/// Inputs of an experiment. `source` is required only for transfer; `pool`
/// for self-training and transfer. Every document must have a
/// representation in `features`.
struct ExperimentData {
  const corpus::Dataset* target = nullptr;
  const corpus::Dataset* pool = nullptr;
  const corpus::Dataset* source = nullptr;
  const models::FeatureStore* features = nullptr;
};

struct FoldLog {
  std::size_t fold = 0;
  selftrain::StopReason stop = selftrain::StopReason::PoolExhausted;
  std::vector<selftrain::IterationLog> iterations;
};

struct Cell {
  Mode mode = Mode::Supervised;
  double fraction = 1.0;
  FoldResults results;
  std::vector<FoldLog> logs;  ///< empty for supervised cells

  /// Paired test of this cell's fold F1 against supervised at 100% and
  /// against self-training at the same fraction, when both exist.
  std::optional<TTestResult> vs_supervised;
  std::optional<TTestResult> vs_selftrain;
};

struct ExperimentResult {
  std::vector<Cell> cells;

  const Cell* find(Mode m, double fraction) const;
};

/// Folds are drawn once on the full target set; for each fraction the
/// training side of every fold is subsampled (stratified, seeded by the fold
/// seed), so all systems and fractions share the same test folds. A 0%
/// fraction is run for transfer only.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data);

/// "*" when the cell's mean F1 exceeds the reference and the difference is
/// significant at 0.05, otherwise "".
std::string marker(const Cell& cell, const std::optional<TTestResult>& test, const Cell* ref,
                   std::string_view symbol);

void write_results_csv(const ExperimentResult& r, const std::filesystem::path& path);
void write_summary_csv(const ExperimentResult& r, const std::filesystem::path& path);
void write_logs_jsonl(const ExperimentResult& r, const std::filesystem::path& path);

std::string format_fraction(double f);
std::string format_number(double x);

}  // namespace sstl::eval
