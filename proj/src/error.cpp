#include "simicl/error.hpp"

namespace simicl {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::InvalidRatio: return "InvalidRatio";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptyLossRegion: return "EmptyLossRegion";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::ConfigRejected: return "ConfigRejected";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "UnknownError";
}

} // namespace simicl
