#pragma once

#include <stdexcept>
#include <string>

namespace otmatch {

// Error categories map onto CLI exit codes (usage=1, io=2, numeric=3).
enum class ErrorKind { usage = 1, io = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return Error(ErrorKind::usage, what); }
inline Error io_error(const std::string& what) { return Error(ErrorKind::io, what); }
inline Error numeric_error(const std::string& what) { return Error(ErrorKind::numeric, what); }

}  // namespace otmatch
