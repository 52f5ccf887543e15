#include "mvfuse/error.hpp"

namespace mvfuse {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::ShrinkNotAllowed: return "ShrinkNotAllowed";
    case ErrorCode::InconsistentStack: return "InconsistentStack";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TooFewViews: return "TooFewViews";
    case ErrorCode::InvalidReference: return "InvalidReference";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::EmptyStageList: return "EmptyStageList";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::IndivisibleInput: return "IndivisibleInput";
    case ErrorCode::UnalignableBatches: return "UnalignableBatches";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace mvfuse
