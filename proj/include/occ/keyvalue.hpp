#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace occ {

// Plain-text `key=value` configuration. Blank lines and lines starting with
// '#' are ignored; keys may repeat and keep their file order.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text);
  static KeyValueFile load(const std::string& path);

  bool contains(std::string_view key) const;
  // Last value given for `key`; throws ParseError when the key is missing.
  const std::string& get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;

  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key) const;
  long long get_int(std::string_view key, long long fallback) const;
  // Whitespace- or comma-separated list of exactly `count` numbers.
  std::vector<double> get_doubles(std::string_view key, std::size_t count) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  void set(std::string key, std::string value);
  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

double parse_double(std::string_view text);
long long parse_int(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

}  // namespace occ
