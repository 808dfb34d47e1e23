#include "frozencil/error.hpp"

namespace frozencil {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kDimension: return "dimension error";
    case ErrorCode::kLabel: return "label error";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kData: return "data error";
    case ErrorCode::kIndex: return "index error";
    case ErrorCode::kArgument: return "argument error";
    case ErrorCode::kConflict: return "conflict error";
    case ErrorCode::kState: return "state error";
    case ErrorCode::kProtocol: return "protocol error";
    case ErrorCode::kDegenerate: return "degenerate-input error";
    case ErrorCode::kNumerical: return "numerical error";
  }
  return "unknown error";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kIndex:
    case ErrorCode::kArgument:
    case ErrorCode::kConflict:
    case ErrorCode::kState:
    case ErrorCode::kProtocol:
      return 2;
    case ErrorCode::kNumerical:
      return 4;
    case ErrorCode::kFormat:
    case ErrorCode::kDimension:
    case ErrorCode::kLabel:
    case ErrorCode::kIo:
    case ErrorCode::kData:
    case ErrorCode::kDegenerate:
      return 3;
  }
  return 1;
}

}  // namespace frozencil
