#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specbench {

enum class ErrorCode {
    InvalidArgument,
    RangeTooShort,
    NonFinite,
    KTooLarge,
    ExhaustedParameterSpace,
    SchemaError,
    EmptyFile,
    TooShort,
    DegenerateInput,
    ZeroVariance,
    NotEnoughStationary,
    ShapeMismatch,
    NonScalarLoss,
    EmptyTrainSet,
    DivergedLoss,
    BadContextLength,
    UnsupportedFamily,
    PatchTooLong,
    TooFewMethods,
    MissingCells,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace specbench
