#pragma once

#include <stdexcept>
#include <string>

namespace quantkit {

/// Raised by every library operation on a contract violation. The message
/// starts with a short stable reason ("empty sample", "class unavailable", ...)
/// that callers and tests may match on.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace quantkit
