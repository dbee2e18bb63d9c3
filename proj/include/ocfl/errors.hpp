#pragma once

#include <stdexcept>
#include <string>

namespace ocfl {

// Base class for every contract violation raised by the library. Callers that
// want blanket handling (the CLI, the test harnesses) catch this; everything
// else catches the specific type it can act on.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ZeroVectorError : public Error {
public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class AlreadyFiredError : public Error {
public:
    using Error::Error;
};

class InvalidLabelError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

class InvalidKError : public Error {
public:
    using Error::Error;
};

class InvalidMinClusterSizeError : public Error {
public:
    using Error::Error;
};

class InsufficientClassesError : public Error {
public:
    using Error::Error;
};

class DegenerateAllocationError : public Error {
public:
    using Error::Error;
};

class MismatchedClientsError : public Error {
public:
    using Error::Error;
};

class EmptyCurveError : public Error {
public:
    using Error::Error;
};

class EmptyEvaluationSetError : public Error {
public:
    using Error::Error;
};

class MissingCheckpointError : public Error {
public:
    using Error::Error;
};

class MissingRunError : public Error {
public:
    using Error::Error;
};

class ConfigParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ocfl
