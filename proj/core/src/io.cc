#include "sentinel/io.h"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>

#include "sentinel/error.h"

namespace sentinel {
namespace {

using nlohmann::json;

std::string KindName(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kBinary: return "binary";
    case FeatureKind::kOrdinal: return "ordinal";
    case FeatureKind::kBoundedNumeric: return "bounded-numeric";
  }
  return "binary";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

double ParseNumber(const std::string& text, size_t row, const std::string& column) {
  try {
    size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo,
                fmt::format("row {}: cannot parse '{}' as a number", row, text),
                column);
  }
}

int64_t ParseInt(const std::string& text, size_t row, const std::string& column) {
  try {
    size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo,
                fmt::format("row {}: cannot parse '{}' as an integer", row, text),
                column);
  }
}

}  // namespace

json SchemaToJson(const FeatureSchema& schema) {
  json features = json::array();
  for (const FeatureDef& f : schema.features()) {
    json params = json::object();
    if (f.kind == FeatureKind::kOrdinal) params["levels"] = f.levels;
    if (f.kind == FeatureKind::kBoundedNumeric) {
      params["lo"] = f.lo;
      params["hi"] = f.hi;
    }
    features.push_back({{"id", f.id},
                        {"kind", KindName(f.kind)},
                        {"params", params},
                        {"display_name", f.display_name}});
  }
  return {{"version", schema.version()}, {"features", features}};
}

FeatureSchema SchemaFromJson(const json& doc) {
  try {
    std::vector<FeatureDef> defs;
    for (const json& f : doc.at("features")) {
      const std::string kind = f.at("kind").get<std::string>();
      const std::string id = f.at("id").get<std::string>();
      const std::string name = f.value("display_name", id);
      const json params = f.value("params", json::object());
      if (kind == "binary") {
        defs.push_back(FeatureDef::Binary(id, name));
      } else if (kind == "ordinal") {
        defs.push_back(FeatureDef::Ordinal(id, params.at("levels").get<int>(), name));
      } else if (kind == "bounded-numeric") {
        defs.push_back(FeatureDef::Numeric(id, params.at("lo").get<double>(),
                                           params.at("hi").get<double>(), name));
      } else {
        throw Error(ErrorCode::kBadConfig,
                    fmt::format("unknown feature kind '{}'", kind), id);
      }
    }
    return FeatureSchema(std::move(defs), doc.value("version", int64_t{1}));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("malformed schema document: {}", e.what()));
  }
}

FeatureSchema LoadSchemaFile(const std::filesystem::path& path) {
  try {
    return SchemaFromJson(json::parse(ReadFile(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kBadConfig,
                fmt::format("{}: {}", path.string(), e.what()));
  }
}

void SaveSchemaFile(const FeatureSchema& schema,
                    const std::filesystem::path& path) {
  WriteFileAtomic(path, SchemaToJson(schema).dump(2) + "\n");
}

json RecordToJson(const SurveyRecord& record) {
  return {{"subject_id", record.subject_id},
          {"locality_id", record.locality_id},
          {"collected_at", record.collected_at},
          {"values", record.values}};
}

SurveyRecord RecordFromJson(const json& doc) {
  SurveyRecord r;
  r.subject_id = doc.at("subject_id").get<std::string>();
  r.locality_id = doc.at("locality_id").get<std::string>();
  r.collected_at = doc.value("collected_at", int64_t{0});
  r.values = doc.at("values").get<std::vector<double>>();
  return r;
}

json LabelToJson(const IncidentLabel& label) {
  return {{"subject_id", label.subject_id},
          {"outcome", OutcomeName(label.outcome)},
          {"observed_at", label.observed_at}};
}

IncidentLabel LabelFromJson(const json& doc) {
  IncidentLabel l;
  l.subject_id = doc.at("subject_id").get<std::string>();
  l.outcome = ParseOutcome(doc.at("outcome").get<std::string>());
  l.observed_at = doc.value("observed_at", int64_t{0});
  return l;
}

std::vector<SurveyRecord> ReadSurveyCsv(std::istream& in,
                                        const FeatureSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kIo, "survey CSV is empty");
  }
  const std::vector<std::string> header = SplitCsvLine(line);
  if (header.size() < 3 || header[0] != "subject_id" ||
      header[1] != "locality_id" || header[2] != "collected_at") {
    throw Error(ErrorCode::kIo,
                "survey CSV header must start with subject_id,locality_id,collected_at");
  }
  // column -> schema index
  std::vector<size_t> slot(header.size(), 0);
  std::vector<bool> covered(schema.size(), false);
  for (size_t c = 3; c < header.size(); ++c) {
    auto idx = schema.IndexOf(header[c]);
    if (!idx) {
      throw Error(ErrorCode::kSchemaMismatch,
                  fmt::format("survey CSV column '{}' is not in the schema", header[c]),
                  header[c]);
    }
    if (covered[*idx]) {
      throw Error(ErrorCode::kSchemaMismatch,
                  fmt::format("survey CSV repeats column '{}'", header[c]), header[c]);
    }
    covered[*idx] = true;
    slot[c] = *idx;
  }
  for (size_t i = 0; i < schema.size(); ++i) {
    if (!covered[i]) {
      throw Error(ErrorCode::kSchemaMismatch,
                  fmt::format("survey CSV lacks column '{}'", schema.feature(i).id),
                  schema.feature(i).id);
    }
  }

  std::vector<SurveyRecord> records;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kIo,
                  fmt::format("row {}: expected {} cells, found {}", row,
                              header.size(), cells.size()));
    }
    SurveyRecord r;
    r.subject_id = cells[0];
    r.locality_id = cells[1];
    r.collected_at = ParseInt(cells[2], row, "collected_at");
    r.values.assign(schema.size(), 0.0);
    for (size_t c = 3; c < cells.size(); ++c) {
      r.values[slot[c]] = ParseNumber(cells[c], row, header[c]);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void WriteSurveyCsv(std::ostream& out, const FeatureSchema& schema,
                    const std::vector<SurveyRecord>& records) {
  out << "subject_id,locality_id,collected_at";
  for (const FeatureDef& f : schema.features()) out << ',' << f.id;
  out << '\n';
  for (const SurveyRecord& r : records) {
    out << r.subject_id << ',' << r.locality_id << ',' << r.collected_at;
    for (double v : r.values) out << ',' << fmt::format("{}", v);
    out << '\n';
  }
}

std::vector<IncidentLabel> ReadIncidentsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  const std::vector<std::string> header = SplitCsvLine(line);
  if (header != std::vector<std::string>{"subject_id", "outcome", "observed_at"}) {
    throw Error(ErrorCode::kIo,
                "incidents CSV header must be subject_id,outcome,observed_at");
  }
  std::vector<IncidentLabel> labels;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != 3) {
      throw Error(ErrorCode::kIo, fmt::format("row {}: expected 3 cells", row));
    }
    IncidentLabel l;
    l.subject_id = cells[0];
    try {
      l.outcome = ParseOutcome(cells[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kIo, fmt::format("row {}: {}", row, e.what()), "outcome");
    }
    l.observed_at = ParseInt(cells[2], row, "observed_at");
    labels.push_back(std::move(l));
  }
  return labels;
}

void WriteIncidentsCsv(std::ostream& out,
                       const std::vector<IncidentLabel>& labels) {
  out << "subject_id,outcome,observed_at\n";
  for (const IncidentLabel& l : labels) {
    out << l.subject_id << ',' << OutcomeName(l.outcome) << ',' << l.observed_at
        << '\n';
  }
}

std::vector<SurveyRecord> LoadSurveyCsv(const std::filesystem::path& path,
                                        const FeatureSchema& schema) {
  std::istringstream in(ReadFile(path));
  return ReadSurveyCsv(in, schema);
}

std::vector<IncidentLabel> LoadIncidentsCsv(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  return ReadIncidentsCsv(in);
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFileAtomic(const std::filesystem::path& path,
                     const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr) {
    throw Error(ErrorCode::kStorage,
                fmt::format("cannot open '{}' for writing", tmp.string()));
  }
  const bool ok = std::fwrite(contents.data(), 1, contents.size(), f) ==
                      contents.size() &&
                  std::fflush(f) == 0 && ::fsync(fileno(f)) == 0;
  std::fclose(f);
  std::error_code ec;
  if (!ok) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kStorage,
                fmt::format("short write to '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kStorage,
                fmt::format("cannot rename into '{}'", path.string()));
  }
}

}  // namespace sentinel
