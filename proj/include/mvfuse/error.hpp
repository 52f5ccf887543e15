#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvfuse {

enum class ErrorCode {
    // volume
    ZeroVariance,
    ShrinkNotAllowed,
    InconsistentStack,
    InvalidDistribution,
    // fusion
    DimMismatch,
    TooFewViews,
    InvalidReference,
    AllZeroWeights,
    InvalidWeights,
    // loss
    EmptyStageList,
    NonFiniteGradient,
    InvalidStep,
    // model
    IndivisibleInput,
    UnalignableBatches,
    NonFiniteLoss,
    InvalidConfig,
    // io
    BadMagic,
    UnsupportedDtype,
    TruncatedFile,
    LengthMismatch,
    InfeasibleSpec,
    IoFailure,
    // cli
    Usage,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

} // namespace mvfuse
