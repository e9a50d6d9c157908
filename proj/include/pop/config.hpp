#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pop/common.hpp"

namespace pop {

// Flat key = value files. '#' starts a comment, blank lines are skipped,
// 'include other.cfg' pulls in another file relative to the current one
// (later assignments win). CLI overrides are applied last.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path) {
    Config c;
    c.load_file(path);
    return c;
  }

  static Config from_text(const std::string& text) {
    Config c;
    c.parse(text, ".");
    return c;
  }

  void apply_overrides(const std::vector<std::string>& kvs) {
    for (const auto& kv : kvs) {
      size_t eq = kv.find('=');
      POP_CHECK(eq != std::string::npos, "override must be key=value: " + kv);
      set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
  }

  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }

  std::string str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) fail("missing config key: " + key);
    return it->second;
  }

  double f64(const std::string& key, double def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : parse_f64(it->second);
  }

  i64 i64_(const std::string& key, i64 def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : parse_i64(it->second);
  }

  bool flag(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail("bad bool for " + key + ": " + v);
  }

  // Sorted dump; embedded in manifests so a rerun sees the exact settings.
  std::string dump() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  void load_file(const std::string& path) {
    parse(slurp(path), std::filesystem::path(path).parent_path().string());
  }

  void parse(const std::string& text, const std::string& dir) {
    for (const auto& raw : split(text, '\n')) {
      std::string line = raw;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.rfind("include ", 0) == 0) {
        std::filesystem::path inc(trim(line.substr(8)));
        if (inc.is_relative()) inc = std::filesystem::path(dir.empty() ? "." : dir) / inc;
        load_file(inc.string());
        continue;
      }
      size_t eq = line.find('=');
      POP_CHECK(eq != std::string::npos, "bad config line: " + raw);
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace pop
