#pragma once

#include <stdexcept>
#include <string>

namespace wk {

/// Failure categories; each maps onto a process exit code of the `wk` tool.
enum class ErrorKind { config, hypothesis, numeric, degenerate, syntax };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::hypothesis:
    case ErrorKind::degenerate:
      return 2;
    case ErrorKind::numeric:
      return 3;
    case ErrorKind::config:
    case ErrorKind::syntax:
      return 4;
  }
  return 3;
}

}  // namespace wk
