#include "sarma/errors.hpp"

namespace sarma {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ConstantSeries: return "ConstantSeries";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::MissingBase: return "MissingBase";
        case ErrorCode::CyclicCrossPredictors: return "CyclicCrossPredictors";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::ChainTooShort: return "ChainTooShort";
        case ErrorCode::MissingConditioning: return "MissingConditioning";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::DegenerateStats: return "DegenerateStats";
        case ErrorCode::NonMonotone: return "NonMonotone";
        case ErrorCode::MissingCrossValues: return "MissingCrossValues";
        case ErrorCode::ShortHistory: return "ShortHistory";
        case ErrorCode::EmptyHoldout: return "EmptyHoldout";
        case ErrorCode::AllTies: return "AllTies";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::MissingData: return "MissingData";
        case ErrorCode::SpecError: return "SpecError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace sarma
