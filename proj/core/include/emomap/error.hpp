#pragma once

#include <stdexcept>
#include <string>

namespace emomap {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input exists but does not parse under the declared format.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A precondition or data invariant was violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Invalid or incomplete configuration (detected before any work starts).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Remote embedding provider failure after retries were exhausted.
class ProviderError : public Error {
public:
    using Error::Error;
};

/// Wraps a failure with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace emomap
