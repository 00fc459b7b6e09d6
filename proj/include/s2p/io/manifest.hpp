#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2p {

/// Ordered key=value text block. `#` starts a comment line; blank lines are
/// allowed. Keys keep insertion order so files diff cleanly.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> items;

  bool has(const std::string& k) const {
    for (auto& it : items)
      if (it.first == k) return true;
    return false;
  }
  const std::string& get(const std::string& k) const {
    for (auto& it : items)
      if (it.first == k) return it.second;
    throw std::out_of_range("manifest key missing: " + k);
  }
  std::string get_or(const std::string& k, std::string dflt) const {
    for (auto& it : items)
      if (it.first == k) return it.second;
    return dflt;
  }
  long long get_int(const std::string& k) const { return std::stoll(get(k)); }
  double get_double(const std::string& k) const { return std::stod(get(k)); }

  void set(const std::string& k, std::string v) {
    for (auto& it : items)
      if (it.first == k) {
        it.second = std::move(v);
        return;
      }
    items.emplace_back(k, std::move(v));
  }
  void set_int(const std::string& k, long long v) { set(k, std::to_string(v)); }

  std::string serialize() const {
    std::ostringstream os;
    for (auto& it : items) os << it.first << "=" << it.second << "\n";
    return os.str();
  }

  static Manifest parse_text(const std::string& text) {
    Manifest m;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      size_t i = line.find_first_not_of(" \t");
      if (i == std::string::npos || line[i] == '#') continue;
      size_t eq = line.find('=', i);
      if (eq == std::string::npos)
        throw std::runtime_error("manifest: bad line: " + line);
      std::string key = line.substr(i, eq - i);
      while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
      size_t v0 = line.find_first_not_of(" \t", eq + 1);
      m.items.emplace_back(key, v0 == std::string::npos ? "" : line.substr(v0));
    }
    return m;
  }

  static Manifest load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
  }
  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << serialize();
  }
};

}  // namespace s2p
