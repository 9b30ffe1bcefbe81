#pragma once

#include <stdexcept>

namespace qrm {

// invalid user input or violated precondition
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// a computation could not deliver a trustworthy result
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// spin direction undefined on the whole axis (s_z vanishes identically, g = 0)
struct degenerate_texture_error : numerical_error {
    using numerical_error::numerical_error;
};

// two independent routes to the same quantity disagree
struct consistency_error : numerical_error {
    using numerical_error::numerical_error;
};

} // namespace qrm
