#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace srmtl {

// Minimal TOML reader covering what the config files need: [tables],
// key = value with strings, integers, floats, booleans, and flat arrays
// of numbers or strings. Keys are exposed as "table.key".
class TomlTable {
 public:
  static TomlTable parse_file(const std::filesystem::path& path);
  static TomlTable parse(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  // Typed getters throw SchemaViolation on a type mismatch and, for the
  // non-optional forms, on a missing key.
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;
  std::vector<std::string> get_string_array(const std::string& key) const;

  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Canonical "key = value" dump, sorted by key; input for config hashing.
  std::string canonical() const;

 private:
  struct Value {
    enum class Kind { String, Number, Boolean, NumberArray, StringArray };
    Kind kind = Kind::String;
    std::string str;
    double number = 0;
    bool boolean = false;
    std::vector<double> number_array;
    std::vector<std::string> string_array;
  };

  const Value& require(const std::string& key) const;

  std::map<std::string, Value> values_;
  std::string origin_;
};

}  // namespace srmtl
