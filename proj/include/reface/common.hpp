#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace reface {

namespace detail {

inline void str_impl(std::ostringstream&) {}

template <typename T, typename... Rest>
void str_impl(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    str_impl(os, rest...);
}

template <typename T>
void str_impl(std::ostringstream& os, const std::vector<T>& v) {
    os << '[';
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    os << ']';
}

}  // namespace detail

template <typename... Args>
std::string str(const Args&... args) {
    std::ostringstream os;
    detail::str_impl(os, args...);
    return os.str();
}

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename... Args>
[[noreturn]] void fail_shape(const Args&... args) {
    throw ShapeError(str(args...));
}

template <typename... Args>
[[noreturn]] void fail_value(const Args&... args) {
    throw ValueError(str(args...));
}

#define REFACE_CHECK(cond, ...)                    \
    do {                                           \
        if (!(cond)) ::reface::fail_shape(__VA_ARGS__); \
    } while (0)

}  // namespace reface
