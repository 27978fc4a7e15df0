#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sstl/config.hpp"

namespace sstl::cli {

/// Every command writes its outputs plus "config.resolved.json" and
/// "manifest.json" (input and output SHA-256 digests) into its output
/// directory. For train-embeddings, whose output is a single file, the two
/// records sit beside it as "<file>.config.json" and "<file>.manifest.json".
struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::size_t threads = 1;
};

void gen_data(const CommandOptions& o);
void train_embeddings(const CommandOptions& o, const std::vector<std::filesystem::path>& corpus);
void train(const CommandOptions& o, const std::filesystem::path& data,
           const std::filesystem::path& embeddings);
void selftrain(const CommandOptions& o, const std::filesystem::path& labeled,
               const std::filesystem::path& unlabeled, const std::filesystem::path& embeddings);
void transfer(const CommandOptions& o, const std::filesystem::path& source,
              const std::filesystem::path& target, const std::filesystem::path& unlabeled,
              const std::filesystem::path& embeddings);
void evaluate(const CommandOptions& o);
void report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sstl::cli
