#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace llmes {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

// No usable tau could be read from a model response.
class ExtractionError : public Error {
public:
    using Error::Error;
};

// A backend call failed. payload() holds whatever raw bytes were received.
class TransportError : public Error {
public:
    TransportError(const std::string& what, std::string payload = {})
        : Error(what), payload_(std::move(payload)) {}

    const std::string& payload() const noexcept { return payload_; }

private:
    std::string payload_;
};

class EmptySessionError : public Error {
public:
    using Error::Error;
};

// Malformed record in a session file. line() is 1-based.
class SessionFormatError : public Error {
public:
    SessionFormatError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class VersionError : public Error {
public:
    using Error::Error;
};

}  // namespace llmes
