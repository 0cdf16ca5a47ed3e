#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace crowdbot {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Degenerate or out-of-contract input (empty text, bad moments, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A message was asked to leave a terminal state.
class InvalidTransition : public Error {
public:
    using Error::Error;
};

/// Operation on a conversation that is closed.
class ConversationClosed : public Error {
public:
    using Error::Error;
};

/// Unknown conversation, message, bot or participant.
class NotFound : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the 1-based line (or record) number.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::uint64_t line() const noexcept { return line_; }

private:
    std::uint64_t line_;
};

/// Event log that cannot be replayed. Carries the offending sequence number.
class CorruptLog : public Error {
public:
    CorruptLog(const std::string& what, std::uint64_t seq)
        : Error(what + " (seq " + std::to_string(seq) + ")"), seq_(seq) {}

    std::uint64_t seq() const noexcept { return seq_; }

private:
    std::uint64_t seq_;
};

}  // namespace crowdbot
