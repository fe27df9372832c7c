#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dna {

// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A parameter is outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Two objects were produced under different projections, embedders or prompt sets.
class ProvenanceError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed input text. `position` is a 1-based line number for line-oriented
// formats and a 0-based byte offset for Newick.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// A request to a generation or embedding endpoint failed. Transport failures,
// HTTP 429 and 5xx are retriable; other statuses are permanent.
class RequestError : public Error {
public:
    RequestError(const std::string& what, int status, bool retriable)
        : Error(what), status_(status), retriable_(retriable) {}
    int status() const noexcept { return status_; }  // 0 for transport failures
    bool retriable() const noexcept { return retriable_; }

private:
    int status_;
    bool retriable_;
};

}  // namespace dna
