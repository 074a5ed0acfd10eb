#pragma once

#include <stdexcept>
#include <string>

namespace lrbench {

// Bad input data or violated contract. The CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem or encoding failure. The CLI maps this to exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lrbench
