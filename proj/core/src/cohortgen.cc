#include "sentinel/cohortgen.h"

#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sentinel/analytics.h"
#include "sentinel/digest.h"
#include "sentinel/error.h"
#include "sentinel/io.h"
#include "sentinel/rng.h"

namespace sentinel {
namespace {

using nlohmann::json;

int64_t IntegerSpan(const FeatureDef& f) {
  return static_cast<int64_t>(std::floor(f.hi) - std::ceil(f.lo)) + 1;
}

double DrawValue(const FeatureDef& f, NumericMode mode, Rng& rng) {
  switch (f.kind) {
    case FeatureKind::kBinary:
      return static_cast<double>(rng.UniformIndex(2));
    case FeatureKind::kOrdinal:
      return static_cast<double>(rng.UniformIndex(static_cast<uint64_t>(f.levels)));
    case FeatureKind::kBoundedNumeric:
      if (mode == NumericMode::kContinuous || IntegerSpan(f) < 1) {
        return rng.Uniform(f.lo, f.hi);
      }
      return std::ceil(f.lo) +
             static_cast<double>(rng.UniformIndex(static_cast<uint64_t>(IntegerSpan(f))));
  }
  return 0.0;
}

// A legal answer different from `current` where the feature allows one.
double DifferentValue(const FeatureDef& f, double current, NumericMode mode,
                      Rng& rng) {
  switch (f.kind) {
    case FeatureKind::kBinary:
      return 1.0 - current;
    case FeatureKind::kOrdinal: {
      const auto k = static_cast<uint64_t>(f.levels);
      const auto level = static_cast<uint64_t>(current);
      return static_cast<double>((level + 1 + rng.UniformIndex(k - 1)) % k);
    }
    case FeatureKind::kBoundedNumeric: {
      const int64_t span = IntegerSpan(f);
      if (mode == NumericMode::kContinuous || span < 2) {
        return rng.Uniform(f.lo, f.hi);
      }
      const auto offset = static_cast<int64_t>(current - std::ceil(f.lo));
      const auto shifted =
          (offset + 1 + static_cast<int64_t>(rng.UniformIndex(static_cast<uint64_t>(span - 1)))) %
          span;
      return std::ceil(f.lo) + static_cast<double>(shifted);
    }
  }
  return current;
}

std::string NumericModeName(NumericMode mode) {
  return mode == NumericMode::kInteger ? "integer" : "continuous";
}

}  // namespace

std::vector<double> GenConfig::archetype_weights() const {
  std::vector<double> w;
  for (const Archetype& a : archetypes) w.push_back(a.weight);
  return w;
}

void GenConfig::Validate(const FeatureSchema& schema) const {
  if (n_records == 0) {
    throw Error(ErrorCode::kBadConfig, "n_records must be positive", "n_records");
  }
  if (locality_count == 0) {
    throw Error(ErrorCode::kBadConfig, "locality_count must be positive",
                "locality_count");
  }
  if (archetypes.empty()) {
    throw Error(ErrorCode::kBadConfig, "at least one archetype is required",
                "archetypes");
  }
  double total = 0.0;
  for (size_t a = 0; a < archetypes.size(); ++a) {
    const double w = archetypes[a].weight;
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kBadConfig, "archetype weights must be non-negative",
                  fmt::format("archetypes/{}/weight", a));
    }
    total += w;
    for (const std::string& id : archetypes[a].contrast) {
      if (!schema.IndexOf(id)) {
        throw Error(ErrorCode::kBadConfig,
                    fmt::format("archetype {} contrasts unknown feature '{}'", a, id),
                    fmt::format("archetypes/{}/contrast", a));
      }
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("archetype weights sum to {}, not 1", total), "archetypes");
  }
  if (!flip_probabilities.empty() && flip_probabilities.size() != schema.size()) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("{} flip probabilities for {} features",
                            flip_probabilities.size(), schema.size()),
                "flip_probabilities");
  }
  for (size_t i = 0; i < flip_probabilities.size(); ++i) {
    if (!(flip_probabilities[i] >= 0.0 && flip_probabilities[i] <= 1.0)) {
      throw Error(ErrorCode::kBadConfig, "flip probabilities must lie in [0, 1]",
                  fmt::format("flip_probabilities/{}", schema.feature(i).id));
    }
  }
  if (!(duplicate_boost >= 0.0 && duplicate_boost <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "duplicate_boost must lie in [0, 1]",
                "duplicate_boost");
  }
  if (invalid_block_size > 0) {
    bool has_ordinal = false;
    for (const FeatureDef& f : schema.features()) {
      has_ordinal = has_ordinal || f.kind == FeatureKind::kOrdinal;
    }
    if (!has_ordinal) {
      throw Error(ErrorCode::kBadConfig,
                  "an invalid block needs at least one ordinal feature",
                  "invalid_block_size");
    }
  }
}

json ToJson(const GenConfig& config, const FeatureSchema& schema) {
  json archetypes = json::array();
  for (const Archetype& a : config.archetypes) {
    archetypes.push_back({{"weight", a.weight}, {"contrast", a.contrast}});
  }
  json flips = json::object();
  for (size_t i = 0; i < schema.size(); ++i) {
    flips[schema.feature(i).id] =
        config.flip_probabilities.empty() ? 0.05 : config.flip_probabilities[i];
  }
  return {{"n_records", config.n_records},
          {"seed", config.seed},
          {"locality_count", config.locality_count},
          {"archetypes", archetypes},
          {"flip_probabilities", flips},
          {"duplicate_boost", config.duplicate_boost},
          {"invalid_block_size", config.invalid_block_size},
          {"numeric_mode", NumericModeName(config.numeric_mode)}};
}

GenConfig GenConfigFromJson(const json& doc, const FeatureSchema& schema) {
  GenConfig c;
  try {
    c.n_records = doc.value("n_records", c.n_records);
    c.seed = doc.value("seed", c.seed);
    c.locality_count = doc.value("locality_count", c.locality_count);
    if (doc.contains("archetypes")) {
      c.archetypes.clear();
      for (const json& a : doc.at("archetypes")) {
        c.archetypes.push_back(
            {a.at("weight").get<double>(),
             a.value("contrast", std::vector<std::string>{})});
      }
    }
    if (doc.contains("flip_probabilities")) {
      const json& flips = doc.at("flip_probabilities");
      if (flips.is_array()) {
        c.flip_probabilities = flips.get<std::vector<double>>();
      } else {
        c.flip_probabilities.assign(schema.size(), 0.05);
        for (size_t i = 0; i < schema.size(); ++i) {
          const FeatureDef& f = schema.feature(i);
          const char* kind = f.kind == FeatureKind::kBinary    ? "binary"
                             : f.kind == FeatureKind::kOrdinal ? "ordinal"
                                                               : "bounded-numeric";
          if (flips.contains(kind)) c.flip_probabilities[i] = flips.at(kind).get<double>();
          if (flips.contains(f.id)) c.flip_probabilities[i] = flips.at(f.id).get<double>();
        }
        for (const auto& [key, value] : flips.items()) {
          if (key != "binary" && key != "ordinal" && key != "bounded-numeric" &&
              !schema.IndexOf(key)) {
            throw Error(ErrorCode::kBadConfig,
                        fmt::format("flip probability for unknown feature '{}'", key),
                        "flip_probabilities/" + key);
          }
        }
      }
    }
    c.duplicate_boost = doc.value("duplicate_boost", c.duplicate_boost);
    c.invalid_block_size = doc.value("invalid_block_size", c.invalid_block_size);
    const std::string mode = doc.value("numeric_mode", std::string("integer"));
    if (mode == "integer") {
      c.numeric_mode = NumericMode::kInteger;
    } else if (mode == "continuous") {
      c.numeric_mode = NumericMode::kContinuous;
    } else {
      throw Error(ErrorCode::kBadConfig, fmt::format("unknown numeric_mode '{}'", mode),
                  "numeric_mode");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("malformed generator config: {}", e.what()));
  }
  c.Validate(schema);
  return c;
}

Dataset Generate(const GenConfig& config, const FeatureSchema& schema) {
  config.Validate(schema);
  const size_t d = schema.size();
  std::vector<double> flips = config.flip_probabilities;
  if (flips.empty()) flips.assign(d, 0.05);

  Rng profile_rng(Rng::DeriveSeed(config.seed, "archetypes"));
  std::vector<std::vector<double>> profiles;
  std::vector<double> base(d);
  for (size_t i = 0; i < d; ++i) {
    base[i] = DrawValue(schema.feature(i), config.numeric_mode, profile_rng);
  }
  for (const Archetype& a : config.archetypes) {
    std::vector<double> v = base;
    for (const std::string& id : a.contrast) {
      const size_t i = *schema.IndexOf(id);
      v[i] = DifferentValue(schema.feature(i), base[i], config.numeric_mode, profile_rng);
    }
    profiles.push_back(std::move(v));
  }

  Rng rng(Rng::DeriveSeed(config.seed, "records"));
  const std::vector<double> weights = config.archetype_weights();
  std::vector<std::vector<size_t>> members(profiles.size());
  auto draw_answers = [&](size_t archetype) {
    std::vector<double> v = profiles[archetype];
    for (size_t i = 0; i < d; ++i) {
      const FeatureDef& f = schema.feature(i);
      if (f.kind == FeatureKind::kBoundedNumeric &&
          config.numeric_mode == NumericMode::kContinuous) {
        v[i] = rng.Uniform(f.lo, f.hi);
      } else if (rng.Bernoulli(flips[i])) {
        v[i] = DifferentValue(f, v[i], config.numeric_mode, rng);
      }
    }
    return v;
  };

  Dataset data{schema, {}, {}};
  data.records.reserve(config.n_records + config.invalid_block_size);
  for (size_t r = 0; r < config.n_records; ++r) {
    const size_t a = rng.Categorical(weights);
    SurveyRecord rec;
    rec.subject_id = fmt::format("S{:04d}", r + 1);
    rec.locality_id = fmt::format("L{:02d}", rng.UniformIndex(config.locality_count) + 1);
    rec.collected_at = static_cast<int64_t>(r);
    if (!members[a].empty() && rng.Bernoulli(config.duplicate_boost)) {
      const size_t src = members[a][rng.UniformIndex(members[a].size())];
      rec.values = data.records[src].values;
    } else {
      rec.values = draw_answers(a);
    }
    members[a].push_back(r);
    data.records.push_back(std::move(rec));
  }

  std::vector<size_t> ordinals;
  for (size_t i = 0; i < d; ++i) {
    if (schema.feature(i).kind == FeatureKind::kOrdinal) ordinals.push_back(i);
  }
  Rng invalid_rng(Rng::DeriveSeed(config.seed, "invalid-block"));
  for (size_t j = 0; j < config.invalid_block_size; ++j) {
    const size_t r = config.n_records + j;
    SurveyRecord rec;
    rec.subject_id = fmt::format("S{:04d}", r + 1);
    rec.locality_id =
        fmt::format("L{:02d}", invalid_rng.UniformIndex(config.locality_count) + 1);
    rec.collected_at = static_cast<int64_t>(r);
    rec.values = profiles[0];
    const size_t i = ordinals[invalid_rng.UniformIndex(ordinals.size())];
    rec.values[i] = static_cast<double>(schema.feature(i).levels) +
                    static_cast<double>(invalid_rng.UniformIndex(3));
    data.records.push_back(std::move(rec));
  }
  return data;
}

CalibrationReport Measure(const Dataset& dataset) {
  const ValidationReport validation = ValidateDataset(dataset);
  const std::vector<size_t> flagged = validation.FlaggedRecords();
  const std::set<size_t> excluded(flagged.begin(), flagged.end());
  std::vector<SurveyRecord> valid;
  for (size_t r = 0; r < dataset.records.size(); ++r) {
    if (!excluded.contains(r)) valid.push_back(dataset.records[r]);
  }
  if (valid.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "calibration needs at least 2 valid records");
  }
  CalibrationReport report;
  report.records_measured = valid.size();
  report.records_excluded = excluded.size();
  const SimilarityStats sim = ComputeSimilarityStats(valid, dataset.schema);
  report.duplicate_partner_fraction = sim.duplicate_partner_fraction;
  report.low_similarity_pair_fraction = sim.LowSimilarityPairFraction(0.70);
  const PcaResult pca = Pca(Matrix::FromRows(NormalizeAll(valid, dataset.schema)));
  report.degenerate = pca.degenerate;
  report.first_pc_evr = pca.explained_variance_ratio[0];
  report.components_for_85 = MinComponentsFor(0.85, pca);
  return report;
}

json ToJson(const CalibrationReport& report) {
  return {{"records_measured", report.records_measured},
          {"records_excluded", report.records_excluded},
          {"duplicate_partner_fraction", report.duplicate_partner_fraction},
          {"low_similarity_pair_fraction_070", report.low_similarity_pair_fraction},
          {"first_pc_evr", report.first_pc_evr},
          {"components_for_85", report.components_for_85},
          {"degenerate", report.degenerate}};
}

std::string DatasetDigest(const Dataset& dataset) {
  std::ostringstream out;
  WriteSurveyCsv(out, dataset.schema, dataset.records);
  return Sha256Hex(out.str());
}

GenConfig GenConfig::Calibrated() {
  GenConfig c;
  c.n_records = 1000;
  c.seed = kCalibratedSeed;
  c.locality_count = 10;
  c.archetypes = {
      {0.9561, {}},
      {0.0226, {"prot_marriage_talk", "prot_migrant_family", "edu_dropped_out",
              "prot_works_outside", "edu_attendance", "nutr_skips_meals",
              "prot_household_conflict"}},
      {0.0071, {"health_sanitation", "health_clinic_distance", "nutr_food_security"}},
      {0.0071, {"edu_parent_schooling", "nutr_income_band", "prot_mobile_access"}},
      {0.0071, {"health_immunized", "nutr_anemia_screened", "health_clinic_registered"}},
  };
  const FeatureSchema schema = FeatureSchema::Default();
  std::set<std::string> contrast;
  for (const Archetype& a : c.archetypes) contrast.insert(a.contrast.begin(), a.contrast.end());
  c.flip_probabilities.resize(schema.size());
  for (size_t i = 0; i < schema.size(); ++i) {
    const FeatureDef& f = schema.feature(i);
    double p = f.kind == FeatureKind::kBinary    ? 0.0503
               : f.kind == FeatureKind::kOrdinal ? 0.0597
                                                 : 0.3064;
    if (contrast.contains(f.id)) p = 0.00164;
    c.flip_probabilities[i] = p;
  }
  c.duplicate_boost = 0.028;
  c.invalid_block_size = 7;
  c.numeric_mode = NumericMode::kInteger;
  return c;
}

}  // namespace sentinel
