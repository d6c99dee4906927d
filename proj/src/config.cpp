#include "dnr/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "dnr/error.hpp"
#include "dnr/io.hpp"

namespace dnr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string_view origin) {
  KeyValues kv;
  kv.origin_ = std::string(origin);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::config, kv.origin_ + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw Error(ErrorCode::config, kv.origin_ + ":" + std::to_string(line_no) + ": empty key");
    if (kv.find(key)) {
      throw Error(ErrorCode::config, kv.origin_ + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    kv.entries_.push_back({key, std::string(trim(line.substr(eq + 1))), line_no});
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::config, "cannot read config file " + path.string());
  }
  return parse(text, path.string());
}

const KeyValues::Entry* KeyValues::find(std::string_view key) const {
  for (const auto& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

bool KeyValues::has(std::string_view key) const { return find(key) != nullptr; }

void KeyValues::set(std::string key, std::string value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  entries_.push_back({std::move(key), std::move(value), 0});
}

const std::string& KeyValues::str(std::string_view key) const {
  const Entry* e = find(key);
  if (!e) throw Error(ErrorCode::config, origin_ + ": missing key '" + std::string(key) + "'");
  e->used = true;
  return e->value;
}

double KeyValues::real(std::string_view key) const {
  const std::string& v = str(key);
  try {
    const double d = parse_double(v);
    if (!std::isfinite(d)) throw Error(ErrorCode::format, "non-finite");
    return d;
  } catch (const Error&) {
    throw Error(ErrorCode::config, origin_ + ": key '" + std::string(key) + "' needs a finite number, got '" + v + "'");
  }
}

std::uint64_t KeyValues::count(std::string_view key) const {
  const std::string& v = str(key);
  try {
    return parse_u64(v);
  } catch (const Error&) {
    throw Error(ErrorCode::config, origin_ + ": key '" + std::string(key) + "' needs a non-negative integer, got '" +
                                       v + "'");
  }
}

bool KeyValues::flag(std::string_view key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw Error(ErrorCode::config, origin_ + ": key '" + std::string(key) + "' needs true/false, got '" + v + "'");
}

std::string KeyValues::str_or(std::string_view key, std::string fallback) const {
  return has(key) ? str(key) : fallback;
}
double KeyValues::real_or(std::string_view key, double fallback) const { return has(key) ? real(key) : fallback; }
std::uint64_t KeyValues::count_or(std::string_view key, std::uint64_t fallback) const {
  return has(key) ? count(key) : fallback;
}
bool KeyValues::flag_or(std::string_view key, bool fallback) const { return has(key) ? flag(key) : fallback; }

std::vector<std::string> KeyValues::unused() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (!e.used) out.push_back(e.key);
  return out;
}

std::string KeyValues::format() const {
  std::string out;
  for (const auto& e : entries_) out += e.key + " = " + e.value + "\n";
  return out;
}

}  // namespace dnr
