#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcoach {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller supplied something that violates a precondition.
class InputError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Request conflicts with current state, e.g. a second live run on a chunk.
class ConflictError : public Error {
public:
    using Error::Error;
};

// Network or provider failure; callers may retry.
class TransportError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    LoadError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class PipelineError : public Error {
public:
    PipelineError(const std::string& what, std::string chunk_id)
        : Error(what), chunk_id_(std::move(chunk_id)) {}
    const std::string& chunk_id() const noexcept { return chunk_id_; }

private:
    std::string chunk_id_;
};

} // namespace gcoach
