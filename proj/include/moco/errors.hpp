#pragma once

#include <stdexcept>
#include <string>

namespace moco {

// Base for everything this library throws on its own behalf.
// std::invalid_argument is used directly for precondition violations.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent on-disk artifact (header/payload mismatch etc).
struct format_error : error {
    explicit format_error(const std::string& msg) : error(msg) {}
};

// Filesystem-level failure (missing file, short read, unwritable path).
struct io_error : error {
    explicit io_error(const std::string& msg) : error(msg) {}
};

// Bad or schema-violating configuration.
struct config_error : error {
    explicit config_error(const std::string& msg) : error(msg) {}
};

// Non-finite state during ODE integration or training.
struct divergence_error : error {
    explicit divergence_error(const std::string& msg) : error(msg) {}
};

// Request exceeds a hard resource cap (e.g. exact trace in high dimension).
struct resource_error : error {
    explicit resource_error(const std::string& msg) : error(msg) {}
};

// Weight file does not match the network architecture it is loaded into.
struct incompatible_weights_error : error {
    explicit incompatible_weights_error(const std::string& msg) : error(msg) {}
};

}  // namespace moco
