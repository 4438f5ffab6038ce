#pragma once

#include <stdexcept>
#include <string>

namespace forgetq {

/// Problems with user-supplied data or stores (bad input, missing snapshot,
/// checksum mismatch). Distinguished from programming errors by the CLI.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace forgetq
