#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace texrisk {

enum class ErrorCode {
    EmptyMask,
    DegenerateBreastMean,
    ParameterOutOfRange,
    ZeroVariance,
    InvalidDates,
    InsufficientControls,
    MissingReferenceRisk,
    MissingLaterality,
    LengthMismatch,
    NoValidationPositives,
    NoViews,
    DegenerateInput,
    DegenerateClasses,
    PairingMismatch,
    EmptyReferenceCell,
    EmptyTrace,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for all domain failures. The code lets callers
// (CLI exit codes, HTTP status mapping, tests) dispatch without RTTI.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    // Without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace texrisk
