#pragma once

/// @file
/// Text serialization helpers. Floats are always written with 17 significant
/// digits so a write/read round trip reproduces the exact double.

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mfg {

inline std::string format_double(double v)
{
  char buf[40];
  const int written = std::snprintf(buf, sizeof(buf), "%.17g", v);
  if (written < 0 || written >= static_cast<int>(sizeof(buf))) {
    throw std::runtime_error("format_double: formatting failed");
  }
  return std::string(buf, static_cast<std::size_t>(written));
}

inline double parse_double(const std::string& s)
{
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) { throw std::runtime_error("parse_double: not a number: " + s); }
  return v;
}

}  // namespace mfg
