#ifndef SENTINEL_COHORTGEN_H_
#define SENTINEL_COHORTGEN_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/schema.h"

namespace sentinel {

// Synthetic survey cohorts drawn from a mixture of archetypes. Each record
// samples an archetype, copies its answer vector and re-draws every feature
// independently with that feature's flip probability. Archetype 0 is the
// base profile; every other archetype differs from it on its contrast
// features.
struct Archetype {
  double weight = 1.0;
  std::vector<std::string> contrast;  // feature ids

  bool operator==(const Archetype&) const = default;
};

enum class NumericMode {
  kInteger,     // bounded-numeric answers are whole numbers in [lo, hi]
  kContinuous,  // bounded-numeric answers are drawn uniformly per record
};

struct GenConfig {
  size_t n_records = 1000;
  uint64_t seed = 0;
  size_t locality_count = 10;
  std::vector<Archetype> archetypes = {Archetype{}};
  // Per feature, schema order. Empty means 0.05 everywhere.
  std::vector<double> flip_probabilities;
  // Probability that a record is an exact copy of an earlier record of the
  // same archetype.
  double duplicate_boost = 0.0;
  // Records appended with an out-of-range ordinal answer.
  size_t invalid_block_size = 7;
  NumericMode numeric_mode = NumericMode::kInteger;

  size_t archetype_count() const { return archetypes.size(); }
  std::vector<double> archetype_weights() const;

  // Throws Error(kBadConfig) naming the offending field.
  void Validate(const FeatureSchema& schema) const;

  // The committed calibration for FeatureSchema::Default(), n = 1000.
  static GenConfig Calibrated();
  static constexpr uint64_t kCalibratedSeed = 20160624;
};

nlohmann::json ToJson(const GenConfig& config, const FeatureSchema& schema);
// flip_probabilities may be an array (schema order) or an object whose keys
// are feature kinds ("binary", "ordinal", "bounded-numeric") and/or feature
// ids; ids override kinds. Unlisted fields keep GenConfig defaults.
GenConfig GenConfigFromJson(const nlohmann::json& doc, const FeatureSchema& schema);

// Deterministic per seed. The invalid block is appended last.
Dataset Generate(const GenConfig& config, const FeatureSchema& schema);

struct CalibrationReport {
  size_t records_measured = 0;
  size_t records_excluded = 0;  // failed validation
  double duplicate_partner_fraction = 0.0;
  double low_similarity_pair_fraction = 0.0;  // below 0.70
  double first_pc_evr = 0.0;
  size_t components_for_85 = 0;
  // No variance in the valid records; the PCA anchors are meaningless.
  bool degenerate = false;
};

// Measures the structural anchors on the records that pass validation.
// Throws Error(kInsufficientData) when fewer than 2 valid records remain.
CalibrationReport Measure(const Dataset& dataset);

nlohmann::json ToJson(const CalibrationReport& report);

// SHA-256 of the dataset's survey CSV rendering.
std::string DatasetDigest(const Dataset& dataset);

}  // namespace sentinel

#endif  // SENTINEL_COHORTGEN_H_
