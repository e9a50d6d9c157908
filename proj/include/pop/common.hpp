#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pop {

using i64 = std::int64_t;
using u64 = std::uint64_t;

inline constexpr const char* kVersion = "1.0.0";

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

#define POP_CHECK(cond, msg) \
  do {                       \
    if (!(cond)) ::pop::fail(std::string("check failed: ") + (msg)); \
  } while (0)

// FNV-1a, 64 bit. Used for artifact hashes and seed derivation.
inline u64 fnv1a64(const void* data, size_t n, u64 h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; i++) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline u64 fnv1a64(std::string_view s, u64 h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline u64 fnv1a64_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open for hashing: " + path);
  u64 h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    h = fnv1a64(buf, static_cast<size_t>(f.gcount()), h);
  }
  return h;
}

// %.17g round-trips doubles exactly; used everywhere a double is printed so
// reruns produce byte-identical files.
inline std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_hex(u64 x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot write: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) fail("short write: " + path);
}

inline double parse_f64(const std::string& s) {
  size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) fail("bad float: '" + s + "'");
  return v;
}

inline i64 parse_i64(const std::string& s) {
  size_t pos = 0;
  long long v = std::stoll(s, &pos);
  if (pos != s.size()) fail("bad int: '" + s + "'");
  return v;
}

inline std::string trim(std::string_view s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); i++) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace pop
