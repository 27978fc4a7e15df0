#include "sstl/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sstl/error.hpp"

namespace sstl::embedding {

EmbeddingModel::EmbeddingModel(std::vector<std::string> words, std::size_t dim,
                               std::vector<double> vectors, nlohmann::json metadata)
    : words_(std::move(words)),
      dim_(dim),
      vectors_(std::move(vectors)),
      metadata_(std::move(metadata)) {
  if (dim_ == 0) throw InvalidArgument("embedding dimension must be > 0");
  if (vectors_.size() != words_.size() * dim_)
    throw InvalidArgument("embedding matrix size does not match vocab x dim");
  for (double v : vectors_)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite embedding component");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second)
      throw InvalidArgument("duplicate vocabulary word: " + words_[i]);
  }
}

std::optional<std::size_t> EmbeddingModel::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const double* EmbeddingModel::find(std::string_view word) const {
  auto idx = index_of(word);
  return idx ? vectors_.data() + *idx * dim_ : nullptr;
}

double EmbeddingModel::cosine(std::size_t a, std::size_t b) const {
  auto va = vector(a), vb = vector(b);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------

void save_embeddings(const EmbeddingModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << m.size() << ' ' << m.dim() << '\n';
  char buf[64];
  for (std::size_t w = 0; w < m.size(); ++w) {
    out << m.words()[w];
    for (double v : m.vector(w)) {
      std::snprintf(buf, sizeof buf, " %.6f", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

EmbeddingModel load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  auto where = [&](std::size_t line) { return path.string() + ":" + std::to_string(line); };

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(where(1), "missing header");
  std::size_t vocab = 0, dim = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> vocab >> dim) || (hs >> extra) || dim == 0)
      throw SchemaError(where(1), "header must be \"<vocab_size> <dim>\"");
  }
  std::vector<std::string> words;
  std::vector<double> vectors;
  words.reserve(vocab);
  vectors.reserve(vocab * dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (words.size() == vocab)
      throw SchemaError(where(line_no), "more vectors than the header's vocab size " +
                                            std::to_string(vocab));
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos || pos == 0)
      throw SchemaError(where(line_no), "expected \"<word> <v1> ... <v_dim>\"");
    words.push_back(line.substr(0, pos));
    std::size_t count = 0;
    const char* p = line.data() + pos;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || !std::isfinite(v))
        throw SchemaError(where(line_no), "bad vector component");
      vectors.push_back(v);
      ++count;
      p = next;
    }
    if (count != dim)
      throw SchemaError(where(line_no), "expected " + std::to_string(dim) +
                                            " components, found " + std::to_string(count));
  }
  if (words.size() != vocab)
    throw SchemaError(where(line_no), "header declares " + std::to_string(vocab) +
                                          " words but body has " + std::to_string(words.size()));
  nlohmann::json meta = {{"source", path.filename().string()}};
  return EmbeddingModel(std::move(words), dim, std::move(vectors), std::move(meta));
}

// ---------------------------------------------------------------------------

DocVector doc_mean_vector(const corpus::Document& doc, const EmbeddingModel& m) {
  DocVector out;
  out.values.assign(m.dim(), 0.0);
  std::size_t known = 0;
  for (const auto& tok : doc.tokens) {
    const double* v = m.find(tok);
    if (!v) continue;
    for (std::size_t i = 0; i < m.dim(); ++i) out.values[i] += v[i];
    ++known;
  }
  if (known == 0) {
    out.oov_only = true;
    return out;
  }
  const double n = static_cast<double>(known);
  for (auto& x : out.values) x /= n;
  return out;
}

TokenMatrix doc_token_matrix(const corpus::Document& doc, const EmbeddingModel& m,
                             std::size_t max_len) {
  if (max_len < kMinTokenMatrixLength)
    throw InvalidArgument("max_len " + std::to_string(max_len) +
                          " is shorter than the widest filter (15)");
  TokenMatrix tm;
  tm.max_len = max_len;
  tm.dim = m.dim();
  tm.true_length = std::min(doc.tokens.size(), max_len);
  tm.rows.assign(max_len * m.dim(), 0.0);
  for (std::size_t t = 0; t < tm.true_length; ++t) {
    const double* v = m.find(doc.tokens[t]);
    if (v) std::copy(v, v + m.dim(), tm.rows.begin() + static_cast<long>(t * m.dim()));
  }
  return tm;
}

std::size_t default_max_len(std::span<const corpus::Document> docs) {
  if (docs.empty()) return kMinTokenMatrixLength;
  std::vector<std::size_t> lengths;
  lengths.reserve(docs.size());
  for (const auto& d : docs) lengths.push_back(d.tokens.size());
  std::sort(lengths.begin(), lengths.end());
  // Nearest-rank percentile.
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(lengths.size())));
  const std::size_t p95 = lengths[std::max<std::size_t>(rank, 1) - 1];
  return std::max(p95, kMinTokenMatrixLength);
}

}  // namespace sstl::embedding
