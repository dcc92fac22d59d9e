#include "acid/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "acid/errors.hpp"

namespace acid {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) out.push_back(parse_double(token));
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || is_space(c)) {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

Config Config::parse(std::string_view text, const std::set<std::string>& repeatable) {
  Config cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected 'key = value'", line_no, line.find_first_not_of(" \t") + 1);
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::size_t key_col = line.find_first_not_of(" \t") + 1;
    if (!valid_key(key)) throw ConfigError("invalid key '" + std::string(key) + "'", line_no, key_col);
    const std::string_view raw_value = line.substr(eq + 1);
    const std::string_view value = trim(raw_value);
    std::size_t value_col = eq + 2;
    if (!value.empty()) value_col = std::size_t(value.data() - line.data()) + 1;
    if (value.empty()) throw ConfigError("missing value for '" + std::string(key) + "'", line_no, value_col);
    const std::string k(key);
    if (cfg.has(k) && !repeatable.count(k)) {
      throw ConfigError("duplicate key '" + k + "'", line_no, key_col);
    }
    cfg.entries_.push_back({k, std::string(value), line_no, value_col, key_col});
    if (end == text.size()) break;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path, const std::set<std::string>& repeatable) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), repeatable);
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

const Config::Entry* Config::find(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::vector<const Config::Entry*> Config::find_all(const std::string& key) const {
  std::vector<const Entry*> out;
  for (const auto& e : entries_) {
    if (e.key == key) out.push_back(&e);
  }
  return out;
}

void Config::fail(const std::string& key, const std::string& message) const {
  const Entry* e = find(key);
  throw ConfigError("key '" + key + "': " + message, e ? e->line : 0, e ? e->column : 0);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    return parse_double(e->value);
  } catch (const std::invalid_argument&) {
    fail(key, "expected a number, got '" + e->value + "'");
  }
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_double(key, 0.0);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::int64_t v = 0;
  const auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size()) {
    fail(key, "expected an integer, got '" + e->value + "'");
  }
  return v;
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  const auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size()) {
    fail(key, "expected a non-negative integer, got '" + e->value + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  fail(key, "expected true or false, got '" + e->value + "'");
}

std::vector<double> Config::get_list(const std::string& key,
                                     const std::vector<double>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    auto v = parse_number_list(e->value);
    if (v.empty()) fail(key, "expected at least one number");
    return v;
  } catch (const std::invalid_argument& ex) {
    fail(key, ex.what());
  }
}

void Config::set(const std::string& key, const std::string& value) {
  erase(key);
  entries_.push_back({key, value, 0, 0, 0});
}

void Config::add(const std::string& key, const std::string& value) {
  entries_.push_back({key, value, 0, 0, 0});
}

void Config::erase(const std::string& key) {
  std::erase_if(entries_, [&](const Entry& e) { return e.key == key; });
}

void Config::require_known(const std::set<std::string>& known) const {
  for (const auto& e : entries_) {
    if (!known.count(e.key)) {
      throw ConfigError("unknown key '" + e.key + "'", e.line, e.key_column);
    }
  }
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& e : entries_) os << e.key << " = " << e.value << '\n';
  return os.str();
}

}  // namespace acid
