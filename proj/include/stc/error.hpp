#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stc {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A call argument is outside its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A configuration value is invalid or unknown.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An operation was invoked on state that cannot support it (e.g. empty cache).
class StateError : public Error {
public:
    using Error::Error;
};

/// Filesystem read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed tensor file. Carries the byte offset where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace stc
