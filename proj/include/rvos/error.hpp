#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rvos {

enum class ErrorCode {
    DimensionMismatch,
    LengthMismatch,
    MalformedRle,
    EmptyClip,
    InconsistentDimensions,
    UnreadableFrame,
    ShapeOutOfCanvas,
    InvalidSpec,
    Timeout,
    Transport,
    SchemaViolation,
    BadImage,
    OutOfRange,
    EmptySeed,
    UnknownSession,
    SessionBusy,
    FixtureExhausted,
    BackendFailure,
    ProtocolViolation,
    InvariantViolation,
    ManifestParse,
    PredictionParse,
    Io,
};

std::string_view to_string(ErrorCode code);
// Unknown names map to BackendFailure.
ErrorCode error_code_from_string(std::string_view name);

// Transient errors are the only ones the HTTP clients retry.
inline bool is_transient(ErrorCode code) {
    return code == ErrorCode::Timeout || code == ErrorCode::Transport;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

// Raised by chat() when a structured reply fails validation; keeps the raw text
// so the caller can quote it back in a repair prompt.
class SchemaViolation : public Error {
public:
    SchemaViolation(const std::string& message, std::string raw)
        : Error(ErrorCode::SchemaViolation, message), raw_(std::move(raw)) {}

    const std::string& raw_text() const noexcept { return raw_; }

private:
    std::string raw_;
};

} // namespace rvos
