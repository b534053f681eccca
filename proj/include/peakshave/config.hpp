#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace peakshave {

/// Flat key=value configuration with dotted section prefixes
/// (e.g. `tariff.energy_price=0.05`). `#` starts a comment line.
class Config {
 public:
  Config() = default;

  /// Throws ConfigError with the line number on a malformed line.
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void erase(const std::string& key) { values_.erase(key); }
  /// Later values win.
  void merge(const Config& other);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys with the given prefix, prefix stripped.
  Config subtree(const std::string& prefix) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Sorted key=value lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_double(std::string_view text, std::string_view what);
std::string format_double(double value);

}  // namespace peakshave
