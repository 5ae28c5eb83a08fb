#pragma once
// Flat `key = value` configuration text. '#' starts a comment; blank lines
// are ignored; a repeated key is an error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace handreg {

/// Shortest text that parses back to the same double.
std::string format_number(double v);

class KeyValues {
 public:
  static KeyValues parse(std::istream& is, const std::string& source = "<stream>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_number(value); }
  void set(const std::string& key, long long value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws InvalidConfig naming every key that was never read.
  void check_all_used() const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  void write(std::ostream& os) const;

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::string source_;
  mutable std::set<std::string> used_;
};

}  // namespace handreg
