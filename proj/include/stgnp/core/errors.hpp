#pragma once

#include <stdexcept>
#include <string>

namespace stgnp {

// Shape/width mismatches in numeric kernels.
struct dim_error : std::invalid_argument {
    explicit dim_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// A caller violated a documented precondition.
struct contract_error : std::invalid_argument {
    explicit contract_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed on-disk data (dataset directories, checkpoints, config files).
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation was called before the object reached the required state.
struct state_error : std::runtime_error {
    explicit state_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values appeared where the math requires finite ones.
struct divergence_error : std::runtime_error {
    explicit divergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A sampled state hit a guarded singularity; the caller should redraw.
struct rejection_error : std::runtime_error {
    explicit rejection_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stgnp
