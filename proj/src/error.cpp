#include "receiptforge/error.hpp"

namespace receiptforge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::InvalidAngle: return "InvalidAngle";
    case ErrorCode::OracleLoadError: return "OracleLoadError";
    case ErrorCode::OracleShapeError: return "OracleShapeError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ClassMismatch: return "ClassMismatch";
    case ErrorCode::NoReceiptRegion: return "NoReceiptRegion";
    case ErrorCode::EdgeNotFound: return "EdgeNotFound";
    case ErrorCode::DegenerateQuad: return "DegenerateQuad";
    case ErrorCode::NotAProductLine: return "NotAProductLine";
    case ErrorCode::AssetError: return "AssetError";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace receiptforge
