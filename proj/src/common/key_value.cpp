#include "handreg/common/key_value.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "handreg/common/error.hpp"

namespace handreg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  HANDREG_THROW_IF(ec != std::errc() || ptr != end, ErrorCode::InvalidConfig,
                   "key '" + key + "': cannot parse '" + text + "' as a number");
  return v;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

KeyValues KeyValues::parse(std::istream& is, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    HANDREG_THROW_IF(eq == std::string::npos, ErrorCode::InvalidConfig,
                     source + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    HANDREG_THROW_IF(key.empty(), ErrorCode::InvalidConfig,
                     source + ":" + std::to_string(number) + ": empty key");
    HANDREG_THROW_IF(kv.values_.count(key) != 0, ErrorCode::InvalidConfig,
                     source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open " + path.string());
  return parse(is, path.string());
}

const std::string& KeyValues::raw(const std::string& key) const {
  const auto it = values_.find(key);
  HANDREG_THROW_IF(it == values_.end(), ErrorCode::InvalidConfig,
                   source_ + ": missing key '" + key + "'");
  used_.insert(key);
  return it->second;
}

std::string KeyValues::get_string(const std::string& key) const { return raw(key); }

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double KeyValues::get_double(const std::string& key) const {
  return parse_number<double>(key, raw(key));
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long KeyValues::get_int(const std::string& key) const {
  return parse_number<long long>(key, raw(key));
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, raw(key));
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "key '" + key + "': expected a boolean, got '" + v + "'");
}

void KeyValues::check_all_used() const {
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  HANDREG_THROW_IF(!unknown.empty(), ErrorCode::InvalidConfig,
                   source_ + ": unknown keys: " + unknown);
}

void KeyValues::write(std::ostream& os) const {
  for (const auto& [key, value] : values_) os << key << " = " << value << '\n';
}

}  // namespace handreg
