#pragma once

#include <stdexcept>
#include <string>

namespace shiftmon {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

// A quantity is mathematically undefined for the given data (e.g. zero variance).
class Degenerate : public Error {
public:
    using Error::Error;
};

class IngestError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace shiftmon
