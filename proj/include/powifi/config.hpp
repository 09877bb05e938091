#pragma once

// Sectioned key-value text used by scenario files:
//
//   # comment
//   key = value
//   [section]            or   [section name]
//   key = value          # trailing comments allowed
//
// Values are kept as text with their line numbers; typed getters report the
// offending key and line on failure and every key must be consumed.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace powifi::config {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Entry {
  std::string key;
  std::string value;
  std::size_t line;
};

class Section {
public:
  Section(std::string type, std::string name, std::size_t line)
      : type_(std::move(type)), name_(std::move(name)), line_(line) {}

  const std::string& type() const { return type_; }
  const std::string& name() const { return name_; }
  std::size_t line() const { return line_; }
  std::string label() const { return name_.empty() ? type_ : type_ + " " + name_; }

  void add(Entry e) {
    for (const auto& x : entries_)
      if (x.key == e.key)
        throw ConfigError("line " + std::to_string(e.line) + ": duplicate key '" + e.key + "' in [" + label() + "]");
    entries_.push_back(std::move(e));
  }

  bool has(std::string_view key) const { return find(key) != nullptr; }

  std::optional<std::string> text(std::string_view key) const {
    if (const Entry* e = find(key)) {
      used_.insert(e->key);
      return e->value;
    }
    return std::nullopt;
  }

  std::optional<double> number(std::string_view key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    used_.insert(e->key);
    char* end = nullptr;
    const double v = std::strtod(e->value.c_str(), &end);
    if (e->value.empty() || end != e->value.c_str() + e->value.size() || !std::isfinite(v))
      fail(*e, "expected a number, got '" + e->value + "'");
    return v;
  }

  std::optional<std::int64_t> integer(std::string_view key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    used_.insert(e->key);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec != std::errc{} || p != e->value.data() + e->value.size())
      fail(*e, "expected an integer, got '" + e->value + "'");
    return v;
  }

  std::optional<bool> boolean(std::string_view key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    used_.insert(e->key);
    if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
    if (e->value == "false" || e->value == "no" || e->value == "0") return false;
    fail(*e, "expected true/false, got '" + e->value + "'");
  }

  std::optional<std::vector<std::string>> list(std::string_view key) const {
    auto t = text(key);
    if (!t) return std::nullopt;
    std::vector<std::string> out;
    std::stringstream ss(*t);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
  }

  // Throws if `key` is present and `ok` rejects its numeric value.
  template <class Pred>
  void require(std::string_view key, Pred ok, const std::string& what) const {
    if (const Entry* e = find(key)) {
      const auto v = number(key);
      if (v && !ok(*v)) fail(*e, what);
    }
  }

  [[noreturn]] void fail(const Entry& e, const std::string& msg) const {
    throw ConfigError("line " + std::to_string(e.line) + ": [" + label() + "] key '" + e.key + "': " + msg);
  }

  [[noreturn]] void fail_key(std::string_view key, const std::string& msg) const {
    if (const Entry* e = find(key)) fail(*e, msg);
    throw ConfigError("line " + std::to_string(line_) + ": [" + label() + "] key '" + std::string(key) + "': " + msg);
  }

  void reject_unused() const {
    for (const auto& e : entries_)
      if (!used_.count(e.key)) fail(e, "unknown key");
  }

  const std::vector<Entry>& entries() const { return entries_; }

private:
  const Entry* find(std::string_view key) const {
    for (const auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::string type_;
  std::string name_;
  std::size_t line_;
  std::vector<Entry> entries_;
  mutable std::set<std::string> used_;
};

struct Document {
  Section root{"", "", 0};
  std::vector<Section> sections;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline Document parse(std::istream& is) {
  Document doc;
  Section* current = &doc.root;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      const std::string inner = trim(std::string_view(t).substr(1, t.size() - 2));
      const auto sp = inner.find_first_of(" \t");
      std::string type = inner.substr(0, sp);
      std::string name = sp == std::string::npos ? "" : trim(std::string_view(inner).substr(sp));
      if (type.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section header");
      doc.sections.emplace_back(std::move(type), std::move(name), line_no);
      current = &doc.sections.back();
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + t + "'");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key before '='");
    current->add({std::move(key), std::move(value), line_no});
  }
  return doc;
}

}  // namespace powifi::config
