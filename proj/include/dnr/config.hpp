#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dnr {

/// Flat key=value text. '#' starts a comment line; blank lines are ignored;
/// whitespace around keys and values is trimmed. Keys are unique.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view origin = "config");
  static KeyValues load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(std::string key, std::string value);

  /// Throw Error(config) naming the key when missing or malformed.
  const std::string& str(std::string_view key) const;
  double real(std::string_view key) const;
  std::uint64_t count(std::string_view key) const;
  bool flag(std::string_view key) const;

  std::string str_or(std::string_view key, std::string fallback) const;
  double real_or(std::string_view key, double fallback) const;
  std::uint64_t count_or(std::string_view key, std::uint64_t fallback) const;
  bool flag_or(std::string_view key, bool fallback) const;

  /// Keys never read through the accessors above; used to reject typos.
  std::vector<std::string> unused() const;

  /// One "key = value" line per entry in insertion order.
  std::string format() const;

 private:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
    mutable bool used = false;
  };
  const Entry* find(std::string_view key) const;

  std::string origin_;
  std::vector<Entry> entries_;
};

}  // namespace dnr
