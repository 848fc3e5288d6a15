#pragma once

#include <stdexcept>
#include <string>

namespace uvreenact {

/// Tensor or vector dimensions do not match what an operation expects.
class ShapeError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A value violates a domain invariant (non-finite, out of range, inconsistent counts).
class ValidationError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A text file (motion/identity/config) could not be parsed.
class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class CheckpointMagicError : public CheckpointError
{
public:
    using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError
{
public:
    using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError
{
public:
    using CheckpointError::CheckpointError;
};

} // namespace uvreenact
