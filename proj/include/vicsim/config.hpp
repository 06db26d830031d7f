#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace vicsim {

// Flat key/value configuration read from a TOML subset: `key = value` lines,
// `[section]` headers (keys become "section.key"), '#' comments, and values
// that are quoted strings, integers, floats or booleans. Arrays and inline
// tables are rejected.
class Config {
 public:
  using Value = std::variant<bool, long long, double, std::string>;

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  bool contains(std::string_view key) const { return values_.count(std::string(key)) != 0; }
  const std::map<std::string, Value>& values() const { return values_; }

  // Typed getters throw InvalidArgument on a type mismatch; integers widen
  // to double.
  std::optional<bool> get_bool(std::string_view key) const;
  std::optional<long long> get_int(std::string_view key) const;
  std::optional<double> get_double(std::string_view key) const;
  std::optional<std::string> get_string(std::string_view key) const;

  void set(std::string key, Value value) { values_[std::move(key)] = std::move(value); }

  // Sorted key = value lines; the hashing input.
  std::string canonical() const;

 private:
  std::map<std::string, Value> values_;
};

std::string sha256_hex(std::string_view data);

}  // namespace vicsim
