#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vitnerf {

/// Flat `key = value` configuration text. Blank lines and lines starting with
/// '#' are ignored. Later assignments (and overrides) replace earlier ones.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<text>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies one "key=value" override.
  void apply_override(const std::string& assignment);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated integers.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  /// Throws ArgumentError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vitnerf
