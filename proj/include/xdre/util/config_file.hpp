#ifndef XDRE_UTIL_CONFIG_FILE_HPP_
#define XDRE_UTIL_CONFIG_FILE_HPP_

// Layered key/value configuration with dotted keys ("graph.eta"). Files use
// a TOML subset: "[section]" headers, "key = value" lines, '#' comments,
// bare numbers/booleans and double-quoted strings.

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xdre::util {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueType { Int, Real, Bool, String };

class Config {
 public:
  struct Entry {
    ValueType type;
    std::string value;
    std::string help;
  };

  /// Registers a key with its type and default. Only declared keys may be set.
  void declare(const std::string& key, ValueType type, std::string default_value, std::string help = {}) {
    check(key, type, default_value);
    entries_[key] = Entry{type, std::move(default_value), std::move(help)};
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  void set(const std::string& key, const std::string& raw) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    std::string v = unquote(trim(raw));
    check(key, it->second.type, v);
    it->second.value = std::move(v);
  }

  /// "key=value" override as given on a command line.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  }

  void merge_text(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      try {
        set(section.empty() ? key : section + "." + key, t.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
  }

  const std::string& raw(const std::string& key) const { return entry(key).value; }

  std::string get_string(const std::string& key) const { return entry(key).value; }
  long long get_int(const std::string& key) const { return std::stoll(typed(key, ValueType::Int)); }
  double get_real(const std::string& key) const { return std::stod(typed(key, ValueType::Real)); }
  bool get_bool(const std::string& key) const { return typed(key, ValueType::Bool) == "true"; }

  /// Sectioned text form; parsing it back yields the same configuration.
  std::string to_text() const {
    std::map<std::string, std::vector<std::pair<std::string, const Entry*>>> sections;
    for (const auto& [key, e] : entries_) {
      const auto dot = key.find('.');
      const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
      sections[sec].emplace_back(dot == std::string::npos ? key : key.substr(dot + 1), &e);
    }
    std::ostringstream os;
    bool first = true;
    for (const auto& [sec, items] : sections) {
      if (!sec.empty()) {
        if (!first) os << "\n";
        os << "[" << sec << "]\n";
      }
      first = false;
      for (const auto& [k, e] : items) os << k << " = " << render(*e) << "\n";
    }
    return os.str();
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  bool operator==(const Config& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (const auto& [k, e] : entries_) {
      auto it = o.entries_.find(k);
      if (it == o.entries_.end() || it->second.value != e.value || it->second.type != e.type) return false;
    }
    return true;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
      std::string out;
      for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i] == '\\' && i + 2 < s.size()) ++i;
        out.push_back(s[i]);
      }
      return out;
    }
    return s;
  }

  static std::string render(const Entry& e) {
    if (e.type != ValueType::String) return e.value;
    std::string out = "\"";
    for (char c : e.value) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    return out + "\"";
  }

  static void check(const std::string& key, ValueType type, const std::string& v) {
    auto fail = [&](const char* what) { throw ConfigError("value '" + v + "' for '" + key + "' is not " + what); };
    switch (type) {
      case ValueType::Int: {
        long long x = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || p != v.data() + v.size()) fail("an integer");
        break;
      }
      case ValueType::Real: {
        try {
          std::size_t used = 0;
          (void)std::stod(v, &used);
          if (used != v.size()) fail("a number");
        } catch (const std::logic_error&) {
          fail("a number");
        }
        break;
      }
      case ValueType::Bool:
        if (v != "true" && v != "false") fail("true or false");
        break;
      case ValueType::String:
        break;
    }
  }

  const Entry& entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
  }

  const std::string& typed(const std::string& key, ValueType type) const {
    const Entry& e = entry(key);
    if (e.type != type) throw ConfigError("configuration key '" + key + "' has a different type");
    return e.value;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace xdre::util

#endif  // XDRE_UTIL_CONFIG_FILE_HPP_
