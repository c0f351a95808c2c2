#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ebtd {

enum class ErrorCode {
    NonFinite,
    EmptyMatrix,
    LengthMismatch,
    NonPositiveVariance,
    ZeroNormInput,
    IterationDivergence,
    InsufficientReplicates,
    InsufficientSignal,
    InsufficientData,
    ParseError,
    DuplicateGroundTruth,
    RequestTooLarge,
    NoGroundTruth,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as an Error carrying a code, so callers
// (the CLI in particular) can map it to an exit status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// NaN/inf at a specific cell.
class NonFiniteError : public Error {
public:
    NonFiniteError(std::size_t row, std::size_t col);

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

// 1-based line and column of a malformed CSV cell.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t col, const std::string& message);

    std::size_t line() const noexcept { return line_; }
    std::size_t col() const noexcept { return col_; }
    // The message without the location prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::size_t col_;
    std::string detail_;
};

} // namespace ebtd
