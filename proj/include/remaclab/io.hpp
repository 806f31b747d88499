#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace remaclab {

// All binary payloads are little-endian float32. Headers are plain text.

inline void write_f32(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) {
    float f = static_cast<float>(x);
    out.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
}

inline std::vector<double> read_f32(std::istream& in, size_t n) {
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), sizeof(float));
    if (!in) throw std::runtime_error("read_f32: truncated payload");
    v[i] = static_cast<double>(f);
  }
  return v;
}

inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string fmt_fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

// FNV-1a over raw bytes; used to link adapter checkpoints to their base.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::vector<double>& v, uint64_t h = 0xcbf29ce484222325ULL) {
  return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(double), h);
}

}  // namespace remaclab
