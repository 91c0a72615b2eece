#pragma once

#include <stdexcept>
#include <string>

namespace shotweave {

// Base for every error raised by the library. Callers that only care about
// "something in shotweave failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input document or value violates a declared schema/invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Operation called outside its precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Model output could not be parsed into the expected structure.
class ParseError : public Error {
public:
    using Error::Error;
};

// Remote/mock generation failed after the retry budget was exhausted.
class ClientError : public Error {
public:
    ClientError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_ = 0;
};

// State-machine transition not allowed from the current state.
class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

}  // namespace shotweave
