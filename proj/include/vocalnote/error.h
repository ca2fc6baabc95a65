#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vocalnote {

enum class ErrorKind {
    MalformedRow,
    NonUniformHop,
    EmptyInput,
    RangeViolation,
    EnvelopeTooShort,
    DegenerateEnvelope,
    HopMismatch,
    EmptyCorpus,
    CommandFailed,
    SchemaViolation,
    MissingInput,
    StaleManifest,
    AugmenterRequired,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Every domain failure surfaces as an Error carrying its kind; the CLI maps
/// these to exit code 1.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace vocalnote
