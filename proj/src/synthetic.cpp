#include <algorithm>
#include <cmath>
#include <string>

#include "sstl/corpus.hpp"
#include "sstl/error.hpp"
#include "sstl/rng.hpp"

namespace sstl::corpus {

void SyntheticConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw InvalidArgument(std::string(name) + " must be > 0");
  };
  positive(n_labeled_target, "n_labeled_target");
  positive(n_unlabeled, "n_unlabeled");
  positive(n_labeled_source, "n_labeled_source");
  positive(vocab_size_per_class, "vocab_size_per_class");
  positive(background_vocab_size, "background_vocab_size");
  positive(doc_length_mean, "doc_length_mean");
  if (!(abnormal_fraction > 0.0 && abnormal_fraction < 1.0))
    throw InvalidArgument("abnormal_fraction must lie in (0, 1)");
  if (!(indicative_rate > 0.0 && indicative_rate <= 1.0))
    throw InvalidArgument("indicative_rate must lie in (0, 1]");
  if (!(domain_shift >= 0.0 && domain_shift <= 1.0))
    throw InvalidArgument("domain_shift must lie in [0, 1]");
  if (!(negation_rate >= 0.0 && negation_rate <= 1.0))
    throw InvalidArgument("negation_rate must lie in [0, 1]");
}

namespace {

/// Zipf(1) sampler over ranks 0..n-1.
class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cumulative_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / static_cast<double>(r + 1);
      cumulative_[r] = total;
    }
    for (auto& c : cumulative_) c /= total;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

struct Lexicon {
  std::size_t per_class;
  std::size_t background;
  // shifted[c][j]: indicative word j of class c has a source-domain synonym.
  std::array<std::vector<char>, 2> shifted;

  std::string indicative(Label c, std::size_t j, bool source) const {
    const char* stem = c == Label::Abnormal ? "ab" : "nm";
    std::string w = stem + std::to_string(j);
    if (source && shifted[index_of(c)][j]) w += "src";
    return w;
  }
  static std::string background_word(std::size_t j) {
    return "w" + std::to_string(j);
  }
};

std::string render(const std::vector<std::string>& sentence_tokens) {
  std::string s;
  for (std::size_t i = 0; i < sentence_tokens.size(); ++i) {
    std::string t = sentence_tokens[i];
    if (i == 0 && !t.empty() && t[0] >= 'a' && t[0] <= 'z')
      t[0] = static_cast<char>(t[0] - 'a' + 'A');
    if (i > 0) s += ' ';
    s += t;
  }
  s += '.';
  return s;
}

class Generator {
 public:
  Generator(const SyntheticConfig& cfg, const Lexicon& lex)
      : cfg_(cfg),
        lex_(lex),
        indicative_(cfg.vocab_size_per_class),
        background_(cfg.background_vocab_size) {}

  Dataset make(std::size_t n, const std::string& id_prefix,
               const std::string& domain, bool source, std::uint64_t seed) const {
    Rng rng(seed);
    const std::size_t n_abnormal =
        std::min(n, round_half_up(cfg_.abnormal_fraction * static_cast<double>(n)));
    std::vector<Label> labels(n, Label::Normal);
    std::fill(labels.begin(), labels.begin() + static_cast<long>(n_abnormal),
              Label::Abnormal);
    rng.shuffle(labels);

    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<Document> docs;
    docs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::string num = std::to_string(i + 1);
      std::string id = id_prefix + std::string(width - num.size(), '0') + num;
      docs.push_back(make_document(std::move(id), text(labels[i], source, rng),
                                   labels[i], domain));
    }
    return Dataset(std::move(docs), domain);
  }

 private:
  std::string text(Label label, bool source, Rng& rng) const {
    const double p = 1.0 / static_cast<double>(cfg_.doc_length_mean);
    const std::size_t length = 1 + rng.geometric(p);
    std::vector<std::string> words;
    words.reserve(length + 2);
    for (std::size_t t = 0; t < length; ++t) {
      if (rng.bernoulli(cfg_.indicative_rate)) {
        words.push_back(lex_.indicative(label, indicative_(rng), source));
      } else {
        words.push_back(Lexicon::background_word(background_(rng)));
      }
    }
    // Negated abnormal phrase, e.g. "no fracture", inside a normal report.
    std::size_t negated_at = words.size() + 1;
    std::vector<std::string> negated;
    if (label == Label::Normal && rng.bernoulli(cfg_.negation_rate)) {
      negated = {"no", lex_.indicative(Label::Abnormal, indicative_(rng), source)};
      negated_at = rng.below(words.size() + 1);
    }

    std::string out;
    std::vector<std::string> sentence;
    std::size_t sentence_len = 4 + rng.below(6);
    auto flush = [&] {
      if (sentence.empty()) return;
      if (!out.empty()) out += ' ';
      out += render(sentence);
      sentence.clear();
      sentence_len = 4 + rng.below(6);
    };
    for (std::size_t t = 0; t <= words.size(); ++t) {
      if (t == negated_at) {
        flush();
        sentence = negated;
        flush();
      }
      if (t == words.size()) break;
      sentence.push_back(words[t]);
      if (sentence.size() >= sentence_len) flush();
    }
    flush();
    return out;
  }

  const SyntheticConfig& cfg_;
  const Lexicon& lex_;
  ZipfSampler indicative_;
  ZipfSampler background_;
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Lexicon lex{cfg.vocab_size_per_class, cfg.background_vocab_size, {}};
  Rng lex_rng(derive_seed(cfg.seed, 0));
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<std::size_t> order(cfg.vocab_size_per_class);
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    lex_rng.shuffle(order);
    const std::size_t n_shift = std::min(
        order.size(),
        round_half_up(cfg.domain_shift * static_cast<double>(order.size())));
    lex.shifted[c].assign(order.size(), 0);
    for (std::size_t j = 0; j < n_shift; ++j) lex.shifted[c][order[j]] = 1;
  }

  Generator gen(cfg, lex);
  SyntheticCorpus out;
  out.target_labeled =
      gen.make(cfg.n_labeled_target, "tgt-l-", "target", false, derive_seed(cfg.seed, 1));
  out.target_unlabeled_truth =
      gen.make(cfg.n_unlabeled, "tgt-u-", "target", false, derive_seed(cfg.seed, 2));
  out.target_unlabeled = out.target_unlabeled_truth.without_labels();
  out.source_labeled =
      gen.make(cfg.n_labeled_source, "src-l-", "source", true, derive_seed(cfg.seed, 3));
  return out;
}

}  // namespace sstl::corpus
