#pragma once

#include <stdexcept>
#include <string>

namespace muserag {

// Base for all expected failures. `code()` is the stable machine-greppable
// identifier the CLI prints (E_PARSE, E_CONFIG, ...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error("E_PARSE", message) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& message) : Error("E_INTEGRITY", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("E_CONFIG", message) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& message) : Error("E_INPUT", message) {}
};

// Persisted-file problems: bad magic, version or fingerprint mismatch, truncation.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("E_FORMAT", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("E_IO", message) {}
};

// Remote service answered but violated the wire contract.
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& message) : Error("E_PROTOCOL", message) {}
};

// Remote service unreachable after retries.
class UnavailableError : public Error {
public:
    explicit UnavailableError(const std::string& message) : Error("E_UNAVAILABLE", message) {}
};

class LookupError : public Error {
public:
    explicit LookupError(const std::string& message) : Error("E_LOOKUP", message) {}
};

} // namespace muserag
