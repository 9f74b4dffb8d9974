#pragma once

#include <stdexcept>
#include <string>

namespace slatesim {

    /// Base for every failure raised by the library.
    class Error : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    class ShapeError : public Error {
    public:
        using Error::Error;
    };

    class DataError : public Error {
    public:
        using Error::Error;
    };

    class ConfigError : public Error {
    public:
        using Error::Error;
    };

    class EnvironmentError : public Error {
    public:
        using Error::Error;
    };

} // namespace slatesim
