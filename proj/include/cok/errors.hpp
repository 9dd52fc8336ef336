#pragma once

#include <stdexcept>
#include <string>

namespace cok {

// Exit codes used by the CLI. Thrown errors map onto these in tools/cok.cpp.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, transport = 3 };

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameter values, out-of-range configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Broken preconditions inside the library (dimension mismatches and the like).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// Unreadable or semantically invalid input files.
class DataError : public Error {
public:
    using Error::Error;
};

// Malformed content at a specific file location.
class ParseError : public DataError {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class CorruptCheckpoint : public DataError {
public:
    using DataError::DataError;
};

class UnsupportedVersion : public CorruptCheckpoint {
public:
    using CorruptCheckpoint::CorruptCheckpoint;
};

// Network / backend failures after retries were exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

// The scripted mock ran out of queued responses: a test bug, not a runtime condition.
class ScriptExhausted : public Error {
public:
    using Error::Error;
};

// Replay log has no record for the requested prompt fingerprint.
class ReplayMiss : public TransportError {
public:
    explicit ReplayMiss(std::uint64_t fp, const std::string& msg)
        : TransportError(msg), fingerprint_(fp) {}
    std::uint64_t fingerprint() const { return fingerprint_; }

private:
    std::uint64_t fingerprint_;
};

}  // namespace cok
