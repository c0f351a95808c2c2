#include "ebtd/error.hpp"

namespace ebtd {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::ZeroNormInput: return "ZeroNormInput";
    case ErrorCode::IterationDivergence: return "IterationDivergence";
    case ErrorCode::InsufficientReplicates: return "InsufficientReplicates";
    case ErrorCode::InsufficientSignal: return "InsufficientSignal";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateGroundTruth: return "DuplicateGroundTruth";
    case ErrorCode::RequestTooLarge: return "RequestTooLarge";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

NonFiniteError::NonFiniteError(std::size_t row, std::size_t col)
    : Error(ErrorCode::NonFinite,
            "non-finite value at (" + std::to_string(row) + ", " + std::to_string(col) + ")"),
      row_(row), col_(col)
{
}

ParseError::ParseError(std::size_t line, std::size_t col, const std::string& message)
    : Error(ErrorCode::ParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + message),
      line_(line), col_(col), detail_(message)
{
}

} // namespace ebtd
