#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace receiptforge {

enum class ErrorCode {
    InvalidGeometry,
    DecodeError,
    InvalidAngle,
    OracleLoadError,
    OracleShapeError,
    ConfigError,
    ClassMismatch,
    NoReceiptRegion,
    EdgeNotFound,
    DegenerateQuad,
    NotAProductLine,
    AssetError,
    EmptyCorpus,
    IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace receiptforge
