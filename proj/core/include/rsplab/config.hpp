#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsplab::config {

// Raised on parse failures and schema violations; messages name the origin
// and line number where that makes sense.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line-oriented configuration: `[section]` headers and `key = value` lines,
// `#` comments. Typed getters mark keys as consumed; after all consumers have
// run, ensure_all_consumed() rejects anything left over, so misspelled keys
// fail loudly instead of silently using defaults.
class RawConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
  };

  static RawConfig parse_string(const std::string& text, const std::string& origin = "<string>");
  static RawConfig parse_file(const std::string& path);

  // CLI override: replaces (or creates) a value; wins over file content.
  void override_value(const std::string& section, const std::string& key, std::string value);

  bool has(const std::string& section, const std::string& key) const;

  // Typed getters with defaults. A present-but-malformed value is an error
  // naming the line; an absent key returns the default.
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& def) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t def) const;
  double get_real(const std::string& section, const std::string& key, double def) const;
  bool get_bool(const std::string& section, const std::string& key, bool def) const;
  std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                const std::vector<int>& def) const;
  std::optional<std::int64_t> get_opt_int(const std::string& section,
                                          const std::string& key) const;

  // Declares a section as known even when every key in it is optional.
  void mark_section_known(const std::string& section) const;

  // Rejects unknown sections and unconsumed keys; call after all module
  // loaders have pulled their values.
  void ensure_all_consumed() const;

  // Deterministic "[section]\nkey = value" rendering with sorted sections
  // and keys; this is what gets hashed and persisted in run manifests.
  std::string canonical() const;
  std::string canonical_sections(const std::vector<std::string>& sections) const;

  const std::string& origin() const { return origin_; }

 private:
  const Entry* find(const std::string& section, const std::string& key) const;

  std::string origin_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  mutable std::map<std::string, bool> known_sections_;
};

// FNV-1a 64-bit over bytes; used for config hashes embedded in checkpoints
// and manifests.
std::uint64_t fnv1a64(const std::string& bytes);

std::string hash_hex(std::uint64_t h);

}  // namespace rsplab::config
