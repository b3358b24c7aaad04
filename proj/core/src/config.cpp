#include "rsplab/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rsplab::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
          c == '_')) {
      return false;
    }
  }
  return true;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  std::ostringstream os;
  os << "config error at " << origin << ":" << line << ": " << what;
  throw ConfigError(os.str());
}

}  // namespace

RawConfig RawConfig::parse_string(const std::string& text, const std::string& origin) {
  RawConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_name(section)) fail(origin, line_no, "invalid section name '" + section + "'");
      cfg.sections_[section];  // a section may legitimately be empty
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_name(key)) fail(origin, line_no, "invalid key name '" + key + "'");
    if (section.empty()) fail(origin, line_no, "key '" + key + "' appears before any [section]");
    auto& sec = cfg.sections_[section];
    auto it = sec.find(key);
    if (it != sec.end()) {
      fail(origin, line_no,
           "duplicate key '" + key + "' in [" + section + "] (first defined at line " +
               std::to_string(it->second.line) + ")");
    }
    sec.emplace(key, Entry{value, line_no, false});
  }
  return cfg;
}

RawConfig RawConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

void RawConfig::override_value(const std::string& section, const std::string& key,
                               std::string value) {
  if (!valid_name(section) || !valid_name(key)) {
    throw ConfigError("invalid override target '" + section + "." + key + "'");
  }
  auto& e = sections_[section][key];
  e.value = std::move(value);
  e.line = 0;  // line 0 marks a CLI override
  e.consumed = false;
}

const RawConfig::Entry* RawConfig::find(const std::string& section, const std::string& key) const {
  known_sections_[section] = true;
  auto sit = sections_.find(section);
  if (sit == sections_.end()) return nullptr;
  auto kit = sit->second.find(key);
  if (kit == sit->second.end()) return nullptr;
  kit->second.consumed = true;
  return &kit->second;
}

bool RawConfig::has(const std::string& section, const std::string& key) const {
  auto sit = sections_.find(section);
  if (sit == sections_.end()) return false;
  return sit->second.count(key) != 0;
}

std::string RawConfig::get_str(const std::string& section, const std::string& key,
                               const std::string& def) const {
  const Entry* e = find(section, key);
  return e ? e->value : def;
}

std::int64_t RawConfig::get_int(const std::string& section, const std::string& key,
                                std::int64_t def) const {
  const Entry* e = find(section, key);
  if (!e) return def;
  std::int64_t out = 0;
  const char* first = e->value.data();
  const char* last = first + e->value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    fail(origin_, e->line, "[" + section + "] " + key + ": expected integer, got '" + e->value + "'");
  }
  return out;
}

double RawConfig::get_real(const std::string& section, const std::string& key, double def) const {
  const Entry* e = find(section, key);
  if (!e) return def;
  try {
    std::size_t pos = 0;
    double out = std::stod(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    fail(origin_, e->line, "[" + section + "] " + key + ": expected real, got '" + e->value + "'");
  }
}

bool RawConfig::get_bool(const std::string& section, const std::string& key, bool def) const {
  const Entry* e = find(section, key);
  if (!e) return def;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  fail(origin_, e->line, "[" + section + "] " + key + ": expected boolean, got '" + e->value + "'");
}

std::vector<int> RawConfig::get_int_list(const std::string& section, const std::string& key,
                                         const std::vector<int>& def) const {
  const Entry* e = find(section, key);
  if (!e) return def;
  std::vector<int> out;
  std::string item;
  std::istringstream in(e->value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    int v = 0;
    const char* first = item.data();
    const char* last = first + item.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || item.empty()) {
      fail(origin_, e->line,
           "[" + section + "] " + key + ": expected comma-separated integers, got '" + e->value + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) {
    fail(origin_, e->line, "[" + section + "] " + key + ": empty list");
  }
  return out;
}

std::optional<std::int64_t> RawConfig::get_opt_int(const std::string& section,
                                                   const std::string& key) const {
  if (!has(section, key)) {
    known_sections_[section] = true;
    return std::nullopt;
  }
  return get_int(section, key, 0);
}

void RawConfig::mark_section_known(const std::string& section) const {
  known_sections_[section] = true;
}

void RawConfig::ensure_all_consumed() const {
  for (const auto& [section, keys] : sections_) {
    auto kit = known_sections_.find(section);
    if (kit == known_sections_.end() || !kit->second) {
      throw ConfigError("config error at " + origin_ + ": unknown section [" + section + "]");
    }
    for (const auto& [key, entry] : keys) {
      if (!entry.consumed) {
        std::string where = entry.line == 0 ? "<cli override>" : std::to_string(entry.line);
        throw ConfigError("config error at " + origin_ + ":" + where + ": unknown key '" + key +
                          "' in [" + section + "]");
      }
    }
  }
}

std::string RawConfig::canonical() const {
  std::ostringstream os;
  for (const auto& [section, keys] : sections_) {
    os << "[" << section << "]\n";
    for (const auto& [key, entry] : keys) {
      os << key << " = " << entry.value << "\n";
    }
  }
  return os.str();
}

std::string RawConfig::canonical_sections(const std::vector<std::string>& wanted) const {
  std::ostringstream os;
  for (const auto& name : wanted) {
    auto sit = sections_.find(name);
    os << "[" << name << "]\n";
    if (sit == sections_.end()) continue;
    for (const auto& [key, entry] : sit->second) {
      os << key << " = " << entry.value << "\n";
    }
  }
  return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace rsplab::config
