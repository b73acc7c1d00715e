#pragma once

#include <stdexcept>
#include <string>

namespace kaas {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A value or argument violated an operation's preconditions.
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& what) : Error(what) {}
};

/// Lookup of a (state, action) pair that was never observed.
class UnexploredPairError : public Error {
public:
    explicit UnexploredPairError(const std::string& what) : Error(what) {}
};

/// Two artifacts were built against different state-space / environment
/// configurations and cannot be combined.
class SignatureMismatchError : public Error {
public:
    explicit SignatureMismatchError(const std::string& what) : Error(what) {}
};

/// An encode session was stepped past the end of its video.
class SessionFinishedError : public Error {
public:
    explicit SessionFinishedError(const std::string& what) : Error(what) {}
};

/// The knowledge base has no entry for the requested policy.
class KnowledgeMissError : public Error {
public:
    explicit KnowledgeMissError(const std::string& what) : Error(what) {}
};

/// Scheduler bookkeeping was asked about a client it does not track.
class BookkeepingError : public Error {
public:
    explicit BookkeepingError(const std::string& what) : Error(what) {}
};

/// An iterative solver failed to converge within its iteration cap.
class OracleFailureError : public Error {
public:
    explicit OracleFailureError(const std::string& what) : Error(what) {}
};

} // namespace kaas
