#pragma once

// Flat key = value config text. `[section]` headers prefix the keys that
// follow ("section.key"); keys before any header live in "experiment".
// '#' starts a comment. Lists are comma-separated.
//
//   [experiment]
//   mode = blind
//   gamma = 8
//   temperature = 8
//
//   [data]
//   source = synthetic
//   samples = 20000

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debias/experiment.hpp"

namespace debias {

class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text, std::string source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value);

  // Typed getters; throw ConfigError naming the field and line on bad values.
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<double>> get_doubles(const std::string& key) const;
  std::optional<std::vector<std::string>> get_strings(const std::string& key) const;

  // Keys never read by a getter, in file order.
  std::vector<std::string> unused_keys() const;
  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    std::size_t order = 0;
  };
  std::string where(const std::string& key) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  mutable std::map<std::string, bool> used_;
};

// Builds an experiment from a config. With `sweep` set, the [sweep] grid
// lists replace the single gamma/temperature/seed. Throws ConfigError for
// missing required fields (e.g. gamma in a DFL mode) and unknown keys.
ExperimentConfig experiment_from_config(const ConfigFile& file, bool sweep = false);

// Canonical text for a resolved experiment: every field, fixed order. Parsing
// it back yields the same experiment.
std::string to_config_text(const ExperimentConfig& cfg);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

}  // namespace debias
