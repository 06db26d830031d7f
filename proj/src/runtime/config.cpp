#include "vicsim/config.hpp"

#include <openssl/sha.h>

#include <charconv>
#include <cstdio>
#include <sstream>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

bool is_bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!text::is_alnum(c) && c != '_' && c != '-' && c != '.') return false;
  return true;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

Config::Value parse_value(std::string_view v, std::size_t line_no) {
  auto fail = [&](const std::string& why) {
    return InvalidArgument("config line " + std::to_string(line_no) + ": " + why);
  };
  if (v.empty()) throw fail("missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw fail("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char e = v[++i];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[' || v.front() == '{') throw fail("arrays and tables are not supported");
  std::string num;
  for (char c : v)
    if (c != '_') num += c;
  long long i = 0;
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), i);
  if (ec == std::errc() && p == num.data() + num.size()) return i;
  char* end = nullptr;
  const double d = std::strtod(num.c_str(), &end);
  if (end == num.c_str() + num.size() && !num.empty()) return d;
  throw fail("cannot parse value '" + std::string(v) + "'");
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = text::trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidArgument("config line " + std::to_string(line_no) + ": bad section");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (!is_bare_key(section)) throw InvalidArgument("config line " + std::to_string(line_no) + ": bad section");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidArgument("config line " + std::to_string(line_no) + ": expected '='");
    auto key = std::string(text::trim(line.substr(0, eq)));
    if (!is_bare_key(key)) throw InvalidArgument("config line " + std::to_string(line_no) + ": bad key");
    if (!section.empty()) key = section + "." + key;
    if (cfg.contains(key)) throw InvalidArgument("config line " + std::to_string(line_no) + ": duplicate key " + key);
    cfg.values_[key] = parse_value(text::trim(line.substr(eq + 1)), line_no);
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::optional<bool> Config::get_bool(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return std::nullopt;
  if (auto b = std::get_if<bool>(&it->second)) return *b;
  throw InvalidArgument("config key " + std::string(key) + " must be a boolean");
}

std::optional<long long> Config::get_int(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return std::nullopt;
  if (auto i = std::get_if<long long>(&it->second)) return *i;
  throw InvalidArgument("config key " + std::string(key) + " must be an integer");
}

std::optional<double> Config::get_double(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return std::nullopt;
  if (auto d = std::get_if<double>(&it->second)) return *d;
  if (auto i = std::get_if<long long>(&it->second)) return static_cast<double>(*i);
  throw InvalidArgument("config key " + std::string(key) + " must be a number");
}

std::optional<std::string> Config::get_string(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return std::nullopt;
  if (auto s = std::get_if<std::string>(&it->second)) return *s;
  throw InvalidArgument("config key " + std::string(key) + " must be a string");
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, bool>) {
            out += x ? "true" : "false";
          } else if constexpr (std::is_same_v<T, std::string>) {
            out += '"' + x + '"';
          } else if constexpr (std::is_same_v<T, double>) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", x);
            out += buf;
          } else {
            out += std::to_string(x);
          }
        },
        v);
    out += '\n';
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

}  // namespace vicsim
