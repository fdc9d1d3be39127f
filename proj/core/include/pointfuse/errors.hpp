#pragma once

#include <stdexcept>
#include <string>

namespace pointfuse {

// Three error families, mapped by the CLI to distinct exit codes:
// ConfigError (bad invocation / bad config), DataError (malformed or
// inconsistent files and datasets), DomainError (math or shape violations
// inside the pipeline).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ZeroVectorError : public DomainError {
public:
    ZeroVectorError() : DomainError("zero-length vector") {}
    explicit ZeroVectorError(const std::string& where)
        : DomainError("zero-length vector: " + where) {}
};

class ShapeError : public DomainError {
public:
    using DomainError::DomainError;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class SchemaVersionError : public DataError {
public:
    SchemaVersionError(int found, int expected)
        : DataError("schema_version " + std::to_string(found) + ", expected "
                    + std::to_string(expected)) {}
};

class InsufficientFramesError : public DataError {
public:
    explicit InsufficientFramesError(const std::string& side)
        : DataError("fewer than 4 frames " + side + " the trigger") {}
};

class AllMissingError : public DataError {
public:
    explicit AllMissingError(const std::string& modality)
        : DataError("modality '" + modality + "' has no valid frame in the recording") {}
};

} // namespace pointfuse
