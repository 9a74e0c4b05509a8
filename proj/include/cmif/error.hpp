#pragma once

#include <stdexcept>
#include <string>

namespace cmif {

// Transform precision is insufficient for exact integer counts.
class numerical_health_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs carry no usable information (e.g. both images quantize to one label).
class degenerate_input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cmif
