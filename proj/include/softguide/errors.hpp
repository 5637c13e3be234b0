#pragma once

#include <stdexcept>
#include <string>

namespace softguide {

// Base for everything the library throws on purpose. The CLI maps the
// subclasses onto exit codes, so keep the hierarchy flat.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Inputs violate a modelling assumption or a configuration rule.
struct ConfigError : Error {
    using Error::Error;
};

// A numerical procedure could not reach the requested accuracy.
struct ToleranceError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace softguide
