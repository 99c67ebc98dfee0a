#include "rvos/error.hpp"

#include <array>
#include <utility>

namespace rvos {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 23> kNames{{
    {ErrorCode::DimensionMismatch, "DimensionMismatch"},
    {ErrorCode::LengthMismatch, "LengthMismatch"},
    {ErrorCode::MalformedRle, "MalformedRle"},
    {ErrorCode::EmptyClip, "EmptyClip"},
    {ErrorCode::InconsistentDimensions, "InconsistentDimensions"},
    {ErrorCode::UnreadableFrame, "UnreadableFrame"},
    {ErrorCode::ShapeOutOfCanvas, "ShapeOutOfCanvas"},
    {ErrorCode::InvalidSpec, "InvalidSpec"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::Transport, "Transport"},
    {ErrorCode::SchemaViolation, "SchemaViolation"},
    {ErrorCode::BadImage, "BadImage"},
    {ErrorCode::OutOfRange, "OutOfRange"},
    {ErrorCode::EmptySeed, "EmptySeed"},
    {ErrorCode::UnknownSession, "UnknownSession"},
    {ErrorCode::SessionBusy, "SessionBusy"},
    {ErrorCode::FixtureExhausted, "FixtureExhausted"},
    {ErrorCode::BackendFailure, "BackendFailure"},
    {ErrorCode::ProtocolViolation, "ProtocolViolation"},
    {ErrorCode::InvariantViolation, "InvariantViolation"},
    {ErrorCode::ManifestParse, "ManifestParse"},
    {ErrorCode::PredictionParse, "PredictionParse"},
    {ErrorCode::Io, "Io"},
}};

} // namespace

std::string_view to_string(ErrorCode code) {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "Unknown";
}

ErrorCode error_code_from_string(std::string_view name) {
    for (const auto& [c, n] : kNames) {
        if (n == name) return c;
    }
    return ErrorCode::BackendFailure;
}

} // namespace rvos
