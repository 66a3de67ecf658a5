#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace densel {

/* Base of every error raised by the library. */
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/* Malformed input bytes or text. */
class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t byteOffset) :
        Error(what + " (byte offset " + std::to_string(byteOffset) + ")"),
        mByteOffset(byteOffset) { }

    std::size_t byteOffset() const noexcept { return mByteOffset; }

private:
    std::size_t mByteOffset;
};

/* Well-formed input that violates a domain invariant. */
class ValidationError : public Error
{
public:
    using Error::Error;
};

/* Bad configuration value or key. */
class ConfigError : public ValidationError
{
public:
    using ValidationError::ValidationError;
};

/* File system failures (missing file, unwritable directory). */
class IoError : public Error
{
public:
    using Error::Error;
};

/* Internal invariant breach; indicates a bug rather than bad input. */
class InvariantError : public Error
{
public:
    using Error::Error;
};

} // namespace densel
