#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace sepatch {

/// Raised for every contract violation in the library (bad shapes, invalid
/// configs, malformed files). The message is meant to be shown to a user.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
[[noreturn]] inline void fail(Args&&... args) {
    std::ostringstream os;
    (os << ... << std::forward<Args>(args));
    throw Error(os.str());
}

template <typename... Args>
inline void check(bool cond, Args&&... args) {
    if (!cond) fail(std::forward<Args>(args)...);
}

}  // namespace detail
}  // namespace sepatch
