#pragma once

#include <stdexcept>
#include <string>

namespace mcrl {

// Bad user-supplied value (non-finite input, label out of range, K > C, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Caller broke a documented shape/dimension precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline void expects(bool cond, const std::string& what) {
    if (!cond) throw ContractViolation(what);
}

inline void check_arg(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace mcrl
