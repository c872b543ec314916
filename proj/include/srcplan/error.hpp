#pragma once

#include <stdexcept>
#include <string>

namespace srcplan {

// Malformed or inconsistent input data. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or configuration. The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace srcplan
