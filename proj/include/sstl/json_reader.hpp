#pragma once

#include <cstdint>
#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "sstl/error.hpp"

namespace sstl {

/// Strict reader over one JSON object. Every accessor records the key it
/// consumed; finish() rejects whatever keys were never read. Errors carry the
/// JSON path of the offending element, e.g. "/selftrain/tau".
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_.empty() ? "/" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string path_of(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const nlohmann::json* child(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  double number(const std::string& key, double def, double lo, double hi,
                bool lo_open = false, bool hi_open = false) {
    const auto* v = child(key);
    if (!v) return def;
    if (!v->is_number()) throw SchemaError(path_of(key), "expected a number");
    const double x = v->get<double>();
    const bool ok = (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      throw SchemaError(path_of(key), "value " + v->dump() + " out of range " +
                                          (lo_open ? "(" : "[") + fmt(lo) + ", " +
                                          fmt(hi) + (hi_open ? ")" : "]"));
    }
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t def, std::uint64_t lo = 0,
                      std::uint64_t hi = UINT64_MAX) {
    const auto* v = child(key);
    if (!v) return def;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                    v->get<std::int64_t>() < 0))
      throw SchemaError(path_of(key), "expected a non-negative integer");
    const std::uint64_t x = v->get<std::uint64_t>();
    if (x < lo || x > hi)
      throw SchemaError(path_of(key), "value " + v->dump() + " out of range [" +
                                          std::to_string(lo) + ", " +
                                          (hi == UINT64_MAX ? std::string("inf")
                                                            : std::to_string(hi)) +
                                          "]");
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    const auto* v = child(key);
    if (!v) return def;
    if (!v->is_boolean()) throw SchemaError(path_of(key), "expected a boolean");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const auto* v = child(key);
    if (!v) return def;
    if (!v->is_string()) throw SchemaError(path_of(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key,
                                   const std::vector<std::string>& def) {
    const auto* v = child(key);
    if (!v) return def;
    if (!v->is_array()) throw SchemaError(path_of(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string())
        throw SchemaError(path_of(key) + "/" + std::to_string(i), "expected a string");
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!used_.count(key)) throw SchemaError(path_of(key), "unknown key \"" + key + "\"");
  }

 private:
  static std::string fmt(double x) {
    nlohmann::json j = x;
    return j.dump();
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace sstl
