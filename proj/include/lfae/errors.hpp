#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lfae {

/// Base class of every error thrown by the library. `category()` is a stable
/// short tag used by the command-line front end as a diagnostic prefix.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual std::string_view category() const noexcept { return "error"; }
};

/// Tensor or image dimensions do not agree with what an operation expects.
class ShapeError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "shape"; }
};

/// A configuration violates one of its invariants.
class ConfigError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "config"; }
};

/// View grid without a unique center (even rows or columns).
class UnsupportedGridError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "grid"; }
};

/// Filesystem or stream failure. The message names the offending path.
class IoError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "io"; }
};

/// One view of a light field is absent on disk.
class MissingViewError : public IoError {
public:
    MissingViewError(std::size_t index, const std::string& path)
        : IoError("missing view " + std::to_string(index) + ": " + path), index_(index) {}
    std::size_t index() const noexcept { return index_; }
    std::string_view category() const noexcept override { return "missing-view"; }

private:
    std::size_t index_;
};

/// Wrong magic bytes or an unknown format version.
class UnsupportedFormatError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "format"; }
};

/// Truncated or internally inconsistent file contents.
class CorruptionError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "corrupt"; }
};

/// An encoded light field was produced by a model with a different architecture.
class IncompatibleEncodingError : public Error {
public:
    using Error::Error;
    std::string_view category() const noexcept override { return "incompatible"; }
};

} // namespace lfae
