#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace mmlda {

// printf-style message builder for error text
inline std::string strfmt(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// malformed input file (bad syntax, wrong field types)
struct FormatError : Error {
  using Error::Error;
};

// structurally valid input violating a data invariant
struct ValidationError : Error {
  using Error::Error;
};

// inconsistent run configuration (bad K, mismatched modalities, ...)
struct ConfigError : Error {
  using Error::Error;
};

// broken internal invariant; indicates a bug, fail fast
struct InternalError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace mmlda
