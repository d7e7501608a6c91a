#pragma once

#include <stdexcept>
#include <string>

namespace tadc {

/// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration: model shapes, loss settings, run config schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given input (e.g. AUC with one class).
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace tadc
