#include "sentinel/schema.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "sentinel/error.h"

namespace sentinel {

FeatureDef FeatureDef::Binary(std::string id, std::string display_name) {
  FeatureDef def;
  def.id = std::move(id);
  def.kind = FeatureKind::kBinary;
  def.display_name = std::move(display_name);
  return def;
}

FeatureDef FeatureDef::Ordinal(std::string id, int levels,
                               std::string display_name) {
  FeatureDef def;
  def.id = std::move(id);
  def.kind = FeatureKind::kOrdinal;
  def.levels = levels;
  def.display_name = std::move(display_name);
  return def;
}

FeatureDef FeatureDef::Numeric(std::string id, double lo, double hi,
                               std::string display_name) {
  FeatureDef def;
  def.id = std::move(id);
  def.kind = FeatureKind::kBoundedNumeric;
  def.lo = lo;
  def.hi = hi;
  def.display_name = std::move(display_name);
  return def;
}

bool FeatureDef::Accepts(double raw) const {
  if (!std::isfinite(raw)) return false;
  switch (kind) {
    case FeatureKind::kBinary:
      return raw == 0.0 || raw == 1.0;
    case FeatureKind::kOrdinal:
      return raw == std::floor(raw) && raw >= 0.0 &&
             raw <= static_cast<double>(levels - 1);
    case FeatureKind::kBoundedNumeric:
      return raw >= lo && raw <= hi;
  }
  return false;
}

double FeatureDef::Normalize(double raw) const {
  switch (kind) {
    case FeatureKind::kBinary:
      return raw;
    case FeatureKind::kOrdinal:
      return raw / static_cast<double>(levels - 1);
    case FeatureKind::kBoundedNumeric:
      return (raw - lo) / (hi - lo);
  }
  return raw;
}

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features, int64_t version)
    : features_(std::move(features)), version_(version) {
  if (features_.empty()) {
    throw Error(ErrorCode::kBadConfig, "schema must define at least one feature");
  }
  for (size_t i = 0; i < features_.size(); ++i) {
    const FeatureDef& f = features_[i];
    if (f.id.empty()) {
      throw Error(ErrorCode::kBadConfig,
                  fmt::format("feature #{} has an empty id", i));
    }
    if (!index_.emplace(f.id, i).second) {
      throw Error(ErrorCode::kBadConfig,
                  fmt::format("duplicate feature id '{}'", f.id), f.id);
    }
    if (f.kind == FeatureKind::kOrdinal && f.levels < 2) {
      throw Error(ErrorCode::kBadConfig,
                  fmt::format("ordinal feature '{}' needs at least 2 levels", f.id),
                  f.id);
    }
    if (f.kind == FeatureKind::kBoundedNumeric &&
        !(std::isfinite(f.lo) && std::isfinite(f.hi) && f.lo < f.hi)) {
      throw Error(ErrorCode::kBadConfig,
                  fmt::format("numeric feature '{}' needs lo < hi", f.id), f.id);
    }
  }
}

std::optional<size_t> FeatureSchema::IndexOf(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureSchema FeatureSchema::Default() {
  using F = FeatureDef;
  std::vector<FeatureDef> f = {
      // education
      F::Binary("edu_attends_school", "Currently attends school"),
      F::Binary("edu_dropped_out", "Dropped out in the last year"),
      F::Binary("edu_literate", "Can read and write"),
      F::Binary("edu_vocational", "Enrolled in vocational training"),
      F::Ordinal("edu_attendance", 4, "School attendance regularity"),
      F::Ordinal("edu_parent_schooling", 4, "Highest parental schooling"),
      F::Ordinal("edu_grade_progress", 4, "Grade progression"),
      F::Numeric("edu_years_schooling", 0, 12, "Years of schooling"),
      // protection
      F::Binary("prot_lives_with_parents", "Lives with both parents"),
      F::Binary("prot_migrant_family", "Family member migrated for work"),
      F::Binary("prot_marriage_talk", "Marriage being arranged"),
      F::Binary("prot_works_outside", "Works outside the home"),
      F::Ordinal("prot_mobile_access", 4, "Unsupervised mobile phone access"),
      F::Ordinal("prot_peer_network", 4, "Strength of peer support network"),
      F::Ordinal("prot_household_conflict", 4, "Household conflict"),
      F::Numeric("prot_age", 10, 19, "Age in years"),
      // health
      F::Binary("health_clinic_registered", "Registered at a health centre"),
      F::Binary("health_chronic_illness", "Chronic illness in household"),
      F::Binary("health_menstrual_hygiene", "Access to menstrual hygiene"),
      F::Binary("health_immunized", "Immunization complete"),
      F::Ordinal("health_clinic_distance", 4, "Distance to nearest clinic"),
      F::Ordinal("health_sanitation", 4, "Household sanitation"),
      F::Ordinal("health_substance_exposure", 4, "Substance use in household"),
      F::Numeric("health_household_size", 1, 15, "Household size"),
      // nutrition
      F::Binary("nutr_midday_meal", "Receives midday meal"),
      F::Binary("nutr_anemia_screened", "Screened for anemia"),
      F::Binary("nutr_ration_card", "Household holds a ration card"),
      F::Binary("nutr_skips_meals", "Regularly skips meals"),
      F::Ordinal("nutr_food_security", 4, "Household food security"),
      F::Ordinal("nutr_diet_diversity", 4, "Dietary diversity"),
      F::Ordinal("nutr_income_band", 4, "Household income band"),
      F::Numeric("nutr_bmi", 12, 30, "Body mass index"),
  };
  return FeatureSchema(std::move(f), 1);
}

std::string OutcomeName(Outcome outcome) {
  return outcome == Outcome::kTrafficked ? "trafficked" : "confirmed-safe";
}

Outcome ParseOutcome(const std::string& text) {
  if (text == "trafficked") return Outcome::kTrafficked;
  if (text == "confirmed-safe") return Outcome::kConfirmedSafe;
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown outcome '{}'", text), "outcome");
}

std::vector<double> Normalize(const SurveyRecord& record,
                              const FeatureSchema& schema) {
  if (record.values.size() != schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                fmt::format("record '{}' has {} values, schema has {} features",
                            record.subject_id, record.values.size(),
                            schema.size()));
  }
  std::vector<double> out(schema.size());
  for (size_t i = 0; i < schema.size(); ++i) {
    const FeatureDef& f = schema.feature(i);
    const double v = record.values[i];
    if (!f.Accepts(v)) {
      throw Error(ErrorCode::kRangeViolation,
                  fmt::format("record '{}': value {} out of range for '{}'",
                              record.subject_id, v, f.id),
                  f.id);
    }
    out[i] = f.Normalize(v);
  }
  return out;
}

std::vector<std::vector<double>> NormalizeAll(
    std::span<const SurveyRecord> records, const FeatureSchema& schema) {
  std::vector<std::vector<double>> rows;
  rows.reserve(records.size());
  for (const SurveyRecord& r : records) rows.push_back(Normalize(r, schema));
  return rows;
}

std::vector<size_t> ValidationReport::FlaggedRecords() const {
  std::set<size_t> flagged;
  for (const Violation& v : violations) {
    if (v.kind == Violation::Kind::kLengthMismatch ||
        v.kind == Violation::Kind::kOutOfRange) {
      flagged.insert(v.record_index);
    }
  }
  return {flagged.begin(), flagged.end()};
}

ValidationReport ValidateDataset(const Dataset& dataset) {
  ValidationReport report;
  const FeatureSchema& schema = dataset.schema;
  std::set<std::string> subjects;
  for (size_t r = 0; r < dataset.records.size(); ++r) {
    const SurveyRecord& rec = dataset.records[r];
    subjects.insert(rec.subject_id);
    if (rec.values.size() != schema.size()) {
      report.violations.push_back({Violation::Kind::kLengthMismatch, r,
                                   rec.subject_id, {},
                                   static_cast<double>(rec.values.size())});
      continue;
    }
    for (size_t i = 0; i < schema.size(); ++i) {
      if (!schema.feature(i).Accepts(rec.values[i])) {
        report.violations.push_back({Violation::Kind::kOutOfRange, r,
                                     rec.subject_id, schema.feature(i).id,
                                     rec.values[i]});
      }
    }
  }
  std::set<std::pair<std::string, int64_t>> seen;
  for (size_t l = 0; l < dataset.labels.size(); ++l) {
    const IncidentLabel& label = dataset.labels[l];
    if (!subjects.contains(label.subject_id)) {
      report.violations.push_back({Violation::Kind::kUnknownLabelSubject, l,
                                   label.subject_id, {}, 0.0});
    }
    if (!seen.emplace(label.subject_id, label.observed_at).second) {
      report.violations.push_back(
          {Violation::Kind::kDuplicateLabel, l, label.subject_id, {},
           static_cast<double>(label.observed_at)});
    }
  }
  return report;
}

}  // namespace sentinel
