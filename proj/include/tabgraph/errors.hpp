#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tabgraph {

// Base for every error the library raises; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed sample, metadata, or checkpoint file. `offset` is the byte
/// position where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

class CliqueExplosion : public Error {
public:
    using Error::Error;
};

class GenOverflow : public Error {
public:
    using Error::Error;
};

class DegenerateQuad : public Error {
public:
    using Error::Error;
};

} // namespace tabgraph
