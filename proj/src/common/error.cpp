#include "texrisk/common/error.hpp"

namespace texrisk {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::DegenerateBreastMean: return "DegenerateBreastMean";
        case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::InvalidDates: return "InvalidDates";
        case ErrorCode::InsufficientControls: return "InsufficientControls";
        case ErrorCode::MissingReferenceRisk: return "MissingReferenceRisk";
        case ErrorCode::MissingLaterality: return "MissingLaterality";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NoValidationPositives: return "NoValidationPositives";
        case ErrorCode::NoViews: return "NoViews";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::DegenerateClasses: return "DegenerateClasses";
        case ErrorCode::PairingMismatch: return "PairingMismatch";
        case ErrorCode::EmptyReferenceCell: return "EmptyReferenceCell";
        case ErrorCode::EmptyTrace: return "EmptyTrace";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace texrisk
