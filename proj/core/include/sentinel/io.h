#ifndef SENTINEL_IO_H_
#define SENTINEL_IO_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentinel/schema.h"

namespace sentinel {

// Schema file: {"version": n, "features": [{"id", "kind", "params",
// "display_name"}]} with kind one of binary / ordinal / bounded-numeric and
// params {"levels": k} or {"lo": a, "hi": b}.
nlohmann::json SchemaToJson(const FeatureSchema& schema);
FeatureSchema SchemaFromJson(const nlohmann::json& doc);
FeatureSchema LoadSchemaFile(const std::filesystem::path& path);
void SaveSchemaFile(const FeatureSchema& schema,
                    const std::filesystem::path& path);

nlohmann::json RecordToJson(const SurveyRecord& record);
SurveyRecord RecordFromJson(const nlohmann::json& doc);
nlohmann::json LabelToJson(const IncidentLabel& label);
IncidentLabel LabelFromJson(const nlohmann::json& doc);

// Survey CSV: subject_id,locality_id,collected_at followed by one column per
// feature id. Columns are matched to the schema by id, so their order is
// free. Out-of-range values are kept as-is for ValidateDataset to report;
// unparseable cells throw Error(kIo).
std::vector<SurveyRecord> ReadSurveyCsv(std::istream& in,
                                        const FeatureSchema& schema);
void WriteSurveyCsv(std::ostream& out, const FeatureSchema& schema,
                    const std::vector<SurveyRecord>& records);

// Incidents CSV: subject_id,outcome,observed_at.
std::vector<IncidentLabel> ReadIncidentsCsv(std::istream& in);
void WriteIncidentsCsv(std::ostream& out,
                       const std::vector<IncidentLabel>& labels);

std::vector<SurveyRecord> LoadSurveyCsv(const std::filesystem::path& path,
                                        const FeatureSchema& schema);
std::vector<IncidentLabel> LoadIncidentsCsv(const std::filesystem::path& path);

std::string ReadFile(const std::filesystem::path& path);
// Writes via a temporary file and rename so readers never see a torn file.
void WriteFileAtomic(const std::filesystem::path& path,
                     const std::string& contents);

}  // namespace sentinel

#endif  // SENTINEL_IO_H_
