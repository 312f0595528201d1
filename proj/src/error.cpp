#include "specbench/error.hpp"

namespace specbench {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::RangeTooShort: return "RangeTooShort";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::ExhaustedParameterSpace: return "ExhaustedParameterSpace";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::NotEnoughStationary: return "NotEnoughStationary";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonScalarLoss: return "NonScalarLoss";
        case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
        case ErrorCode::DivergedLoss: return "DivergedLoss";
        case ErrorCode::BadContextLength: return "BadContextLength";
        case ErrorCode::UnsupportedFamily: return "UnsupportedFamily";
        case ErrorCode::PatchTooLong: return "PatchTooLong";
        case ErrorCode::TooFewMethods: return "TooFewMethods";
        case ErrorCode::MissingCells: return "MissingCells";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace specbench
