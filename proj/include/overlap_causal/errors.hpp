#pragma once

#include <stdexcept>
#include <string>

namespace overlap_causal {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unknown node label or index.
class LookupError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Orientation produced contradictory marks; the candidate has no MAG.
class InconsistencyError : public Error {
public:
    using Error::Error;
};

/// Two sources of causal information disagree about the same pair.
class ContradictionError : public Error {
public:
    using Error::Error;
};

/// Malformed data, config or graph file.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace overlap_causal
