#pragma once

#include <stdexcept>
#include <string>

namespace d2lv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad magic bytes or an unsupported container layout.
class FormatError : public Error {
public:
    using Error::Error;
};

// Stream ended before the declared payload did.
class TruncationError : public Error {
public:
    using Error::Error;
};

// Payload decoded but violates a value invariant (NaN floats, broken norms).
class CorruptionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class BatchError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace d2lv
