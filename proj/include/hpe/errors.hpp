#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hpe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point lands at or behind the camera plane (z <= 1e-9).
class BehindCamera : public Error {
public:
    using Error::Error;
};

/// PnP input that cannot determine a pose (too few points, collinear model...).
class DegenerateProblem : public Error {
public:
    using Error::Error;
};

/// A value lies outside the accepted interval (angle bins, stretch factors).
class OutOfRange : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class UnknownScheme : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed line in a text input; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class WrongCount : public Error {
public:
    using Error::Error;
};

class DuplicateId : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or parameter.
class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace hpe
