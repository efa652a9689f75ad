#pragma once

#include <cstddef>
#include <istream>
#include <set>
#include <string>
#include <vector>

#include "ddfh/error.hpp"

namespace ddfh::cli {

struct ConfigLine {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Reads the `key = value` config format: one setting per line, `#` starts
/// a comment, blank lines are ignored, and a key may appear only once.
inline std::vector<ConfigLine> parse_config_file(std::istream& in) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::vector<ConfigLine> out;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    ConfigLine cl{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line_no};
    if (cl.key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(cl.key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + cl.key + "'");
    }
    out.push_back(std::move(cl));
  }
  return out;
}

}  // namespace ddfh::cli
