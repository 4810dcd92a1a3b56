#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace starmap {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A distance query named a tag that no feature of the map carries.
class MissingTagError : public Error {
public:
    explicit MissingTagError(const std::string& tag)
        : Error("no feature with tag '" + tag + "'"), tag_(tag) {}

    const std::string& tag() const { return tag_; }

private:
    std::string tag_;
};

// Field construction or evaluation failures (out of extent, missing key, GP breakdown).
class FieldError : public Error {
public:
    using Error::Error;
};

class MissingFieldError : public FieldError {
public:
    using FieldError::FieldError;
};

class OutOfExtentError : public FieldError {
public:
    using FieldError::FieldError;
};

// Malformed input data (OSM XML / Overpass JSON / archives). Carries a byte offset when known.
class SourceError : public Error {
public:
    SourceError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}
    explicit SourceError(const std::string& what) : Error(what), offset_(npos) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t byte_offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Tag mapping left nothing to build a map from.
class EmptyMapError : public Error {
public:
    using Error::Error;
};

}  // namespace starmap
