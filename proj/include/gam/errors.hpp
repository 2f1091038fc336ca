#pragma once

#include <stdexcept>
#include <string>

namespace gam {

// File could not be read/written/created.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (cloud/mesh/config/checkpoint files).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically degenerate state: NaN loss, fully masked softmax row,
// zero-extent point cloud, disconnected mesh.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gam
