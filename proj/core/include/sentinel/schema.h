#ifndef SENTINEL_SCHEMA_H_
#define SENTINEL_SCHEMA_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sentinel {

enum class FeatureKind { kBinary, kOrdinal, kBoundedNumeric };

// One survey question. Raw values are 0/1 for binary features, the integer
// level 0..levels-1 for ordinal features and a real in [lo, hi] for
// bounded-numeric features.
struct FeatureDef {
  std::string id;
  FeatureKind kind = FeatureKind::kBinary;
  int levels = 2;   // ordinal arity
  double lo = 0.0;  // bounded-numeric range
  double hi = 1.0;
  std::string display_name;

  static FeatureDef Binary(std::string id, std::string display_name = {});
  static FeatureDef Ordinal(std::string id, int levels,
                            std::string display_name = {});
  static FeatureDef Numeric(std::string id, double lo, double hi,
                            std::string display_name = {});

  bool Accepts(double raw) const;
  // Maps an accepted raw value to [0, 1].
  double Normalize(double raw) const;

  bool operator==(const FeatureDef&) const = default;
};

class FeatureSchema {
 public:
  // Throws Error(kBadConfig) on duplicate ids, an empty feature list,
  // ordinal arity < 2 or lo >= hi.
  FeatureSchema(std::vector<FeatureDef> features, int64_t version = 1);

  // 32 placeholder questions (16 binary, 12 ordinal(4), 4 bounded-numeric)
  // spread over the education, protection, health and nutrition verticals.
  // Deployments load the real questionnaire from a schema file.
  static FeatureSchema Default();

  size_t size() const { return features_.size(); }
  int64_t version() const { return version_; }
  const std::vector<FeatureDef>& features() const { return features_; }
  const FeatureDef& feature(size_t i) const { return features_[i]; }
  std::optional<size_t> IndexOf(const std::string& id) const;

  bool operator==(const FeatureSchema& other) const {
    return version_ == other.version_ && features_ == other.features_;
  }

 private:
  std::vector<FeatureDef> features_;
  int64_t version_;
  std::unordered_map<std::string, size_t> index_;
};

struct SurveyRecord {
  std::string subject_id;
  std::string locality_id;
  std::vector<double> values;  // schema order
  int64_t collected_at = 0;

  bool operator==(const SurveyRecord&) const = default;
};

enum class Outcome { kTrafficked, kConfirmedSafe };

std::string OutcomeName(Outcome outcome);
Outcome ParseOutcome(const std::string& text);

struct IncidentLabel {
  std::string subject_id;
  Outcome outcome = Outcome::kConfirmedSafe;
  int64_t observed_at = 0;

  bool operator==(const IncidentLabel&) const = default;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<SurveyRecord> records;
  std::vector<IncidentLabel> labels;
};

// Throws Error(kSchemaMismatch) when the lengths differ and
// Error(kRangeViolation, field = feature id) for an illegal value.
std::vector<double> Normalize(const SurveyRecord& record,
                              const FeatureSchema& schema);

// Row-major n x d matrix of normalized records, for analytics.
std::vector<std::vector<double>> NormalizeAll(
    std::span<const SurveyRecord> records, const FeatureSchema& schema);

struct Violation {
  enum class Kind {
    kLengthMismatch,
    kOutOfRange,
    kUnknownLabelSubject,
    kDuplicateLabel,
  };
  Kind kind = Kind::kOutOfRange;
  size_t record_index = 0;  // index into records or labels
  std::string subject_id;
  std::string feature_id;  // empty unless kOutOfRange
  double value = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
  // Sorted, de-duplicated indices of records with at least one record-level
  // violation.
  std::vector<size_t> FlaggedRecords() const;
};

ValidationReport ValidateDataset(const Dataset& dataset);

}  // namespace sentinel

#endif  // SENTINEL_SCHEMA_H_
