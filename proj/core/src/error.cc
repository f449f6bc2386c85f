#include "sentinel/error.h"

namespace sentinel {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kRangeViolation: return "RangeViolation";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kBadK: return "BadK";
    case ErrorCode::kUnknownSubject: return "UnknownSubject";
    case ErrorCode::kUnknownAgent: return "UnknownAgent";
    case ErrorCode::kConflict: return "Conflict";
    case ErrorCode::kCorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::kScenarioError: return "ScenarioError";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kStorage: return "Storage";
  }
  return "Unknown";
}

}  // namespace sentinel
