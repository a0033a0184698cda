#pragma once

#include <stdexcept>
#include <string>

namespace backheat {

/// Raised when an operation's preconditions are violated by the caller.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a mathematical guarantee fails at runtime (an inequality that
/// must hold, an identity that must be exact to round-off). The CLI maps this
/// to exit code 2.
class InvariantViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {
[[noreturn]] inline void reject(const std::string& what) { throw InputError(what); }
inline void require(bool ok, const std::string& what) {
  if (!ok) reject(what);
}
}  // namespace detail

}  // namespace backheat
