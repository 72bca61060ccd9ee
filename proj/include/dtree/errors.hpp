#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dtree {

/// A caller broke an operation's precondition (unknown route, reused token).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Topology construction, generation or parsing failed.
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes on the wire. `offset` points at the first offending byte.
class WireError : public std::runtime_error {
 public:
  WireError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " +
                           std::to_string(offset) + ")"),
        reason_(what),
        offset_(offset) {}

  [[nodiscard]] std::size_t offset() const { return offset_; }
  /// The message without the offset suffix.
  [[nodiscard]] const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
  std::size_t offset_;
};

/// Run configuration rejected before anything started.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtree
