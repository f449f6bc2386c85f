#ifndef SENTINEL_ERROR_H_
#define SENTINEL_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace sentinel {

enum class ErrorCode {
  kInvalidArgument,
  kSchemaMismatch,
  kRangeViolation,
  kDimensionMismatch,
  kEmptyTrainingSet,
  kInsufficientData,
  kBadK,
  kUnknownSubject,
  kUnknownAgent,
  kConflict,
  kCorruptSnapshot,
  kScenarioError,
  kBadConfig,
  kIo,
  kStorage,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures surface as sentinel::Error. `field` names the
// offending feature id, JSON path, or event, when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace sentinel

#endif  // SENTINEL_ERROR_H_
