#pragma once

// Flat "key = value" run configuration. Precedence is command-line flag,
// then REDEP_<KEY> environment variable, then config file.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace redep {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string value;
  int line = 0;
};

using ConfigMap = std::map<std::string, ConfigEntry>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// '#' starts a comment; blank lines ignored; duplicate keys are errors.
inline ConfigMap parse_config(std::istream& in, const std::string& source = "<config>") {
  ConfigMap out;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    if (out.count(key))
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = ConfigEntry{value, line_no};
  }
  return out;
}

inline ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in, path);
}

// Environment variable consulted for a config key: REDEP_ + upper-case key.
inline std::string env_name(const std::string& key) {
  std::string out = "REDEP_";
  for (char c : key) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

// key -> command-line flag (without leading dashes)
using FlagTable = std::map<std::string, std::string>;

// Appends "--flag value" for every config key whose flag is absent from the
// command line and whose environment variable is unset. Unknown keys throw.
inline std::vector<std::string> merge_config(std::vector<std::string> args, const ConfigMap& config,
                                             const FlagTable& flags, const std::string& source,
                                             const EnvLookup& env = process_env) {
  auto on_command_line = [&](const std::string& flag) {
    const std::string f = "--" + flag;
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == f || a.rfind(f + "=", 0) == 0; });
  };
  std::vector<std::string> extra;
  for (const auto& [key, entry] : config) {
    auto it = flags.find(key);
    if (it == flags.end())
      throw ConfigError(source + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
    if (on_command_line(it->second) || env(env_name(it->second))) continue;
    extra.push_back("--" + it->second);
    extra.push_back(entry.value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace redep
