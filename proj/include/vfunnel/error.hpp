#pragma once

#include <stdexcept>
#include <string>

namespace vfunnel {

/// Raised for any precondition violation on caller-supplied data
/// (bad shapes, negative weights, out-of-range indices, malformed files).
class InvalidInput : public std::invalid_argument {
public:
  explicit InvalidInput(const std::string &what) : std::invalid_argument(what) {}
};

} // namespace vfunnel
