#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace acid {

// Flat "key = value" text. '#' starts a comment; blank lines are ignored.
// Only keys listed as repeatable may appear more than once.
class Config {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;        // 1-based, 0 for programmatic entries
    std::size_t column = 0;      // column of the value
    std::size_t key_column = 0;  // column of the key
  };

  static Config parse(std::string_view text, const std::set<std::string>& repeatable = {});
  static Config load(const std::filesystem::path& path,
                     const std::set<std::string>& repeatable = {});

  bool has(const std::string& key) const;
  const Entry* find(const std::string& key) const;
  std::vector<const Entry*> find_all(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma- or whitespace-separated numbers.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Replaces every entry for key (or appends).
  void set(const std::string& key, const std::string& value);
  void add(const std::string& key, const std::string& value);
  void erase(const std::string& key);

  // Throws ConfigError naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::string serialize() const;

  // Errors for the value of `key`, located at that entry.
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  std::vector<Entry> entries_;
};

double parse_double(std::string_view text);  // throws std::invalid_argument
std::vector<double> parse_number_list(std::string_view text);

}  // namespace acid
