#include "sstl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <unordered_set>

#include "sstl/error.hpp"
#include "sstl/rng.hpp"

namespace sstl::corpus {

using nlohmann::json;

std::string_view to_string(Label l) {
  return l == Label::Abnormal ? "abnormal" : "normal";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "normal") return Label::Normal;
  if (s == "abnormal") return Label::Abnormal;
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    char c = raw;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      current.push_back(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Document make_document(std::string id, std::string text,
                       std::optional<Label> label, std::string domain) {
  Document d;
  d.tokens = tokenize(text);
  d.id = std::move(id);
  d.text = std::move(text);
  d.label = label;
  d.domain = std::move(domain);
  return d;
}

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

// ---------------------------------------------------------------------------

namespace {

void check_homogeneous(const std::vector<Document>& docs) {
  std::vector<std::string> labeled, unlabeled;
  for (const auto& d : docs) (d.label ? labeled : unlabeled).push_back(d.id);
  if (!labeled.empty() && !unlabeled.empty()) {
    std::string msg = "mixed labeled/unlabeled dataset; unlabeled ids:";
    const std::size_t shown = std::min<std::size_t>(unlabeled.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) msg += " " + unlabeled[i];
    if (unlabeled.size() > shown) msg += " ...";
    msg += "; labeled ids:";
    for (std::size_t i = 0; i < std::min<std::size_t>(labeled.size(), 10); ++i)
      msg += " " + labeled[i];
    if (labeled.size() > 10) msg += " ...";
    throw InvalidArgument(msg);
  }
}

}  // namespace

Dataset::Dataset(std::vector<Document> documents, std::string domain)
    : documents_(std::move(documents)), domain_(std::move(domain)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(documents_.size());
  for (const auto& d : documents_) {
    if (!seen.insert(d.id).second)
      throw InvalidArgument("duplicate document id: " + d.id);
  }
  check_homogeneous(documents_);
}

bool Dataset::is_labeled() const {
  return std::all_of(documents_.begin(), documents_.end(),
                     [](const Document& d) { return d.label.has_value(); });
}

bool Dataset::is_unlabeled() const {
  return std::none_of(documents_.begin(), documents_.end(),
                      [](const Document& d) { return d.label.has_value(); });
}

std::array<std::size_t, 2> Dataset::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& d : documents_)
    if (d.label) ++counts[index_of(*d.label)];
  return counts;
}

std::vector<Label> Dataset::labels() const {
  std::vector<Label> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) {
    if (!d.label) throw InvalidArgument("document " + d.id + " has no label");
    out.push_back(*d.label);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
  std::vector<Document> docs;
  docs.reserve(positions.size());
  for (std::size_t p : positions) docs.push_back(documents_.at(p));
  return Dataset(std::move(docs), domain_);
}

Dataset Dataset::without_labels() const {
  Dataset out = *this;
  for (auto& d : out.documents_) d.label.reset();
  return out;
}

void Dataset::append(std::span<const Document> docs) {
  std::vector<Document> merged = documents_;
  merged.insert(merged.end(), docs.begin(), docs.end());
  *this = Dataset(std::move(merged), domain_);
}

// ---------------------------------------------------------------------------

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  std::string domain;
  bool mixed_domain = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(where, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw SchemaError(where, "record is not an object");
    for (const auto& [key, _] : rec.items()) {
      if (key != "id" && key != "text" && key != "label" && key != "domain")
        throw SchemaError(where, "unknown key \"" + key + "\"");
    }
    auto require_string = [&](const char* key) -> std::string {
      if (!rec.contains(key) || !rec[key].is_string())
        throw SchemaError(where, std::string("\"") + key + "\" must be a string");
      return rec[key].get<std::string>();
    };
    std::string id = require_string("id");
    std::string text = require_string("text");
    std::string dom = require_string("domain");
    std::optional<Label> label;
    if (!rec.contains("label"))
      throw SchemaError(where, "missing \"label\"");
    if (!rec["label"].is_null()) {
      if (!rec["label"].is_string())
        throw SchemaError(where, "\"label\" must be \"normal\", \"abnormal\" or null");
      label = parse_label(rec["label"].get<std::string>());
      if (!label)
        throw SchemaError(where, "invalid label \"" +
                                     rec["label"].get<std::string>() + "\"");
    }
    if (!ids.insert(id).second)
      throw SchemaError(where, "duplicate id \"" + id + "\"");
    if (docs.empty()) {
      domain = dom;
    } else if (dom != domain) {
      mixed_domain = true;
    }
    docs.push_back(make_document(std::move(id), std::move(text), label,
                                 std::move(dom)));
  }
  return Dataset(std::move(docs), mixed_domain ? "mixed" : domain);
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : ds.documents()) {
    nlohmann::ordered_json rec;
    rec["id"] = d.id;
    rec["text"] = d.text;
    rec["label"] = d.label ? json(std::string(to_string(*d.label))) : json(nullptr);
    rec["domain"] = d.domain;
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

namespace {

std::array<std::vector<std::size_t>, 2> positions_by_class(const Dataset& ds) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& d = ds[i];
    if (!d.label) throw InvalidArgument("dataset must be labeled");
    by_class[index_of(*d.label)].push_back(i);
  }
  return by_class;
}

}  // namespace

Split stratified_split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidArgument("split fraction must lie in [0, 1]");
  auto by_class = positions_by_class(ds);
  Rng rng(seed);
  std::vector<char> chosen(ds.size(), 0);
  for (auto& members : by_class) {
    const std::size_t take = std::min(members.size(),
                                      round_half_up(fraction * members.size()));
    rng.shuffle(members);
    for (std::size_t i = 0; i < take; ++i) chosen[members[i]] = 1;
  }
  std::vector<std::size_t> selected, rest;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (chosen[i] ? selected : rest).push_back(i);
  return {ds.subset(selected), ds.subset(rest)};
}

Dataset stratified_subsample(const Dataset& ds, double fraction,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidArgument("subsample fraction must lie in (0, 1]");
  const auto counts = ds.class_counts();
  if (!ds.is_labeled() || counts[0] == 0 || counts[1] == 0)
    throw InvalidArgument("stratified_subsample needs a labeled dataset with both classes");
  if (fraction == 1.0) return ds;
  return stratified_split(ds, fraction, seed).selected;
}

std::vector<Fold> stratified_kfold(const Dataset& ds, std::size_t k,
                                   std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("k must be at least 2");
  auto by_class = positions_by_class(ds);
  for (std::size_t c = 0; c < 2; ++c) {
    if (by_class[c].size() < k)
      throw InvalidArgument("class " + std::string(to_string(Label(c))) +
                            " has " + std::to_string(by_class[c].size()) +
                            " documents, fewer than k = " + std::to_string(k));
  }
  Rng rng(seed);
  std::vector<std::size_t> fold_of(ds.size());
  // A single counter runs across both classes so total fold sizes also stay
  // within one of each other.
  std::size_t counter = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (std::size_t p : members) fold_of[p] = counter++ % k;
  }
  std::vector<Fold> folds;
  folds.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < ds.size(); ++i)
      (fold_of[i] == f ? test : train).push_back(i);
    folds.push_back({ds.subset(train), ds.subset(test)});
  }
  return folds;
}

}  // namespace sstl::corpus
