#pragma once

#include "acmap/types.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace acmap {

/// Line-oriented "key = value" config file. '#' starts a comment; keys may
/// repeat (e.g. scene box lists). Values keep internal whitespace.
class KvFile {
public:
  struct Entry {
    std::string key;
    std::string value;
    int line;
  };

  static KvFile parse(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    KvFile kv;
    kv.path_ = path;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ParseError(path, lineno, "expected 'key = value'");
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ParseError(path, lineno, "empty key");
      kv.entries_.push_back({key, value, lineno});
    }
    return kv;
  }

  const std::string& path() const { return path_; }
  const std::vector<Entry>& entries() const { return entries_; }

  bool has(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.key == key) return true;
    return false;
  }

  std::optional<std::string> get(const std::string& key) const {
    std::optional<std::string> out;
    for (const auto& e : entries_)
      if (e.key == key) out = e.value;  // last one wins
    return out;
  }

  std::vector<std::string> get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (e.key == key) out.push_back(e.value);
    return out;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
      throw ParseError(path_, "key '" + key + "': bad number '" + *v + "'");
    }
  }

  int get_int(const std::string& key, int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stoi(*v);
    } catch (const std::exception&) {
      throw ParseError(path_, "key '" + key + "': bad integer '" + *v + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
    throw ParseError(path_, "key '" + key + "': bad boolean '" + *v + "'");
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
  }

  /// Rejects keys outside the allowed set; typo protection for configs.
  void restrict_keys(const std::vector<std::string>& allowed) const {
    for (const auto& e : entries_) {
      bool ok = false;
      for (const auto& a : allowed)
        if (e.key == a) {
          ok = true;
          break;
        }
      if (!ok) throw ParseError(path_, e.line, "unknown key '" + e.key + "'");
    }
  }

  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

private:
  std::string path_;
  std::vector<Entry> entries_;
};

}  // namespace acmap
