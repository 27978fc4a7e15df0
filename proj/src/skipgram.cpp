#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "sstl/embedding.hpp"
#include "sstl/error.hpp"
#include "sstl/rng.hpp"

namespace sstl::embedding {

void SkipgramConfig::validate() const {
  if (dim == 0 || window == 0 || negatives == 0 || epochs == 0 || min_count == 0)
    throw InvalidArgument("skip-gram counts must be > 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("skip-gram learning_rate must be > 0");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log(sigmoid(x)), stable for large |x|.
double neg_log_sigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace

EmbeddingModel train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const SkipgramConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw InvalidArgument("skip-gram corpus is empty");

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& w : sentence) ++counts[w];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [w, c] : counts)
    if (c >= cfg.min_count) kept.emplace_back(w, c);
  if (kept.empty())
    throw InvalidArgument("no word reaches min_count; effective vocabulary is empty");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  const std::size_t vocab = kept.size();
  const std::size_t dim = cfg.dim;
  std::vector<std::string> words;
  std::unordered_map<std::string, std::size_t> index;
  words.reserve(vocab);
  for (std::size_t i = 0; i < vocab; ++i) {
    words.push_back(kept[i].first);
    index.emplace(kept[i].first, i);
  }

  std::vector<std::vector<std::size_t>> sentences;
  sentences.reserve(corpus.size());
  std::size_t train_words = 0;
  for (const auto& sentence : corpus) {
    std::vector<std::size_t> ids;
    for (const auto& w : sentence) {
      auto it = index.find(w);
      if (it != index.end()) ids.push_back(it->second);
    }
    train_words += ids.size();
    sentences.push_back(std::move(ids));
  }

  // unigram^0.75 noise distribution
  std::vector<double> noise_cdf(vocab);
  double total = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    total += std::pow(static_cast<double>(kept[i].second), 0.75);
    noise_cdf[i] = total;
  }
  for (auto& c : noise_cdf) c /= total;

  Rng rng(cfg.seed);
  std::vector<double> in_vec(vocab * dim);
  std::vector<double> out_vec(vocab * dim, 0.0);
  const double init = 0.5 / static_cast<double>(dim);
  for (auto& v : in_vec) v = rng.uniform(-init, init);

  auto sample_noise = [&]() {
    auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), rng.uniform());
    return std::min<std::size_t>(it - noise_cdf.begin(), vocab - 1);
  };

  const double total_steps = static_cast<double>(train_words * cfg.epochs);
  std::size_t processed = 0;
  std::vector<double> grad_in(dim);
  std::vector<double> epoch_loss;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& ids : sentences) {
      for (std::size_t pos = 0; pos < ids.size(); ++pos, ++processed) {
        const double progress = total_steps > 0 ? processed / total_steps : 0.0;
        const double lr = cfg.learning_rate * (1.0 - 0.9 * progress);
        const std::size_t reach = cfg.window - rng.below(cfg.window);
        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(ids.size() - 1, pos + reach);
        double* center = in_vec.data() + ids[pos] * dim;
        for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
          if (ctx == pos) continue;
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (std::size_t s = 0; s <= cfg.negatives; ++s) {
            std::size_t target;
            double label;
            if (s == 0) {
              target = ids[ctx];
              label = 1.0;
            } else {
              target = sample_noise();
              if (target == ids[ctx]) continue;
              label = 0.0;
            }
            double* out = out_vec.data() + target * dim;
            double f = 0.0;
            for (std::size_t d = 0; d < dim; ++d) f += center[d] * out[d];
            loss_sum += label > 0 ? neg_log_sigmoid(f) : neg_log_sigmoid(-f);
            const double g = (label - sigmoid(f)) * lr;
            for (std::size_t d = 0; d < dim; ++d) {
              grad_in[d] += g * out[d];
              out[d] += g * center[d];
            }
          }
          for (std::size_t d = 0; d < dim; ++d) center[d] += grad_in[d];
          ++pairs;
        }
      }
    }
    epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }

  nlohmann::json meta = {
      {"algorithm", "skip-gram negative sampling"},
      {"dim", cfg.dim},
      {"window", cfg.window},
      {"negatives", cfg.negatives},
      {"epochs", cfg.epochs},
      {"learning_rate", cfg.learning_rate},
      {"min_count", cfg.min_count},
      {"seed", cfg.seed},
      {"documents", corpus.size()},
      {"training_tokens", train_words},
      {"epoch_loss", epoch_loss},
  };
  return EmbeddingModel(std::move(words), dim, std::move(in_vec), std::move(meta));
}

}  // namespace sstl::embedding
