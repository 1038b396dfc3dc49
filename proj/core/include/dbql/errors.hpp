#pragma once

#include <stdexcept>
#include <string>

namespace dbql {

/// A precondition of a library call was violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The requested configuration has no valid outcome (e.g. more agents
/// than distinct state-action pairs in conflict-free mode).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A discount factor at or above one; value iteration would not contract.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid experiment configuration. key() names the field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

namespace detail {
inline void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}
}  // namespace detail

}  // namespace dbql
