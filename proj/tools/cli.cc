#include "cli.h"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sentinel/analytics.h"
#include "sentinel/cohortgen.h"
#include "sentinel/error.h"
#include "sentinel/gateway.h"
#include "sentinel/http_server.h"
#include "sentinel/io.h"
#include "sentinel/report_export.h"
#include "sentinel/syncsim.h"

namespace sentinel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

FeatureSchema SchemaOrDefault(const std::string& path) {
  return path.empty() ? FeatureSchema::Default() : LoadSchemaFile(path);
}

void Write(const fs::path& dir, const std::string& name, const std::string& contents) {
  WriteFileAtomic(dir / name, contents);
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                fmt::format("cannot create {}: {}", dir.string(), ec.message()), "out");
  }
}

std::string ViolationKindName(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kLengthMismatch: return "length-mismatch";
    case Violation::Kind::kOutOfRange: return "out-of-range";
    case Violation::Kind::kUnknownLabelSubject: return "unknown-label-subject";
    case Violation::Kind::kDuplicateLabel: return "duplicate-label";
  }
  return "unknown";
}

json ViolationToJson(const Violation& v) {
  json out = {{"kind", ViolationKindName(v.kind)},
              {"index", v.record_index},
              {"subject_id", v.subject_id}};
  if (!v.feature_id.empty()) {
    out["feature_id"] = v.feature_id;
    out["value"] = v.value;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string data;
  std::string schema;
  std::string out;
  size_t clusters = 7;
  size_t dims = 0;  // 0 = components needed for 85% variance
  double tau = 0.5;
};

int Analyze(const AnalyzeArgs& a, std::ostream& out) {
  const FeatureSchema schema = SchemaOrDefault(a.schema);
  Dataset dataset{schema, LoadSurveyCsv(a.data, schema), {}};
  const ValidationReport validation = ValidateDataset(dataset);
  const std::vector<size_t> flagged = validation.FlaggedRecords();
  const std::set<size_t> excluded(flagged.begin(), flagged.end());
  std::vector<SurveyRecord> valid;
  json excluded_ids = json::array();
  for (size_t i = 0; i < dataset.records.size(); ++i) {
    if (excluded.contains(i)) {
      excluded_ids.push_back(dataset.records[i].subject_id);
    } else {
      valid.push_back(dataset.records[i]);
    }
  }
  if (valid.size() < 3) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("analysis needs at least 3 valid records, found {}",
                            valid.size()),
                "data");
  }

  const Matrix data = Matrix::FromRows(NormalizeAll(valid, schema));
  const PcaResult pca = Pca(data);
  const size_t k85 = MinComponentsFor(0.85, pca);
  const size_t dims = a.dims == 0 ? std::max<size_t>(k85, 1) : a.dims;
  if (dims > pca.dims()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("--dims {} exceeds the {} features", dims, pca.dims()), "dims");
  }
  const ClusterTree tree = WardCluster(Project(data, pca, dims));
  const std::vector<int> labels = CutTree(tree, a.clusters);
  const SimilarityStats sim = ComputeSimilarityStats(valid, schema);
  const CorrelationReport corr = ComputeCorrelationReport(valid, schema, a.tau);

  const fs::path dir(a.out);
  EnsureDir(dir);
  json loadings = json::array();
  for (size_t j = 0; j < dims; ++j) loadings.push_back(pca.components.column(j));
  json pca_json = {{"feature_ids", corr.feature_ids},
                   {"eigenvalues", pca.eigenvalues},
                   {"explained_variance_ratio", pca.explained_variance_ratio},
                   {"components_for_85", k85},
                   {"projection_dims", dims},
                   {"loadings", loadings},
                   {"degenerate", pca.degenerate}};
  Write(dir, "pca.json", pca_json.dump(2) + "\n");
  Write(dir, "merges.txt", MergeListText(tree));
  Write(dir, "dendrogram.svg", DendrogramSvg(tree, labels));
  std::string clusters_csv = "subject_id,cluster\n";
  for (size_t i = 0; i < valid.size(); ++i) {
    clusters_csv += fmt::format("{},{}\n", valid[i].subject_id, labels[i]);
  }
  Write(dir, "clusters.csv", clusters_csv);
  Write(dir, "similarity_hist.csv", SimilarityHistogramCsv(sim));
  Write(dir, "similarity_hist.svg", SimilarityHistogramSvg(sim));
  Write(dir, "correlogram.svg", CorrelogramSvg(corr));
  Write(dir, "correlation_graph.dot", CorrelationGraphDot(corr));

  std::vector<size_t> sizes(a.clusters, 0);
  for (int l : labels) ++sizes[static_cast<size_t>(l)];
  json summary = {{"records", dataset.records.size()},
                  {"records_analyzed", valid.size()},
                  {"excluded_subjects", excluded_ids},
                  {"first_pc_evr", pca.explained_variance_ratio[0]},
                  {"components_for_85", k85},
                  {"clusters", a.clusters},
                  {"cluster_sizes", sizes},
                  {"duplicate_partner_fraction", sim.duplicate_partner_fraction},
                  {"low_similarity_pair_fraction_070", sim.LowSimilarityPairFraction(0.70)},
                  {"correlation_tau", a.tau},
                  {"positive_correlation_edges", corr.positive_edges.size()}};
  Write(dir, "summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string schema;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<size_t> n;
};

int GenerateCmd(const GenerateArgs& a, std::ostream& out) {
  const FeatureSchema schema = SchemaOrDefault(a.schema);
  GenConfig config = a.config.empty()
                         ? GenConfig::Calibrated()
                         : GenConfigFromJson(json::parse(ReadFile(a.config)), schema);
  if (a.seed) config.seed = *a.seed;
  if (a.n) config.n_records = *a.n;
  const Dataset dataset = Generate(config, schema);

  const fs::path dir(a.out);
  EnsureDir(dir);
  std::ostringstream csv;
  WriteSurveyCsv(csv, schema, dataset.records);
  Write(dir, "survey.csv", csv.str());
  Write(dir, "schema.json", SchemaToJson(schema).dump(2) + "\n");
  Write(dir, "gen_config.json", ToJson(config, schema).dump(2) + "\n");
  json report = ToJson(Measure(dataset));
  report["seed"] = config.seed;
  report["records"] = dataset.records.size();
  report["digest"] = DatasetDigest(dataset);
  Write(dir, "calibration.json", report.dump(2) + "\n");
  out << report.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

int Simulate(const SimulateArgs& a, std::ostream& out) {
  const fs::path config_path(a.config);
  SimConfig config = SimConfigFromJson(json::parse(ReadFile(config_path)),
                                       config_path.parent_path().string());
  if (a.seed) config.seed = *a.seed;
  const SimReport report = RunSimulation(config);

  const fs::path dir(a.out);
  EnsureDir(dir);
  Write(dir, "report.json", report.ToJson().dump(2) + "\n");
  Write(dir, "trace.jsonl", report.TraceJsonl());
  Write(dir, "divergence.csv", report.DivergenceCsv());
  out << fmt::format("simulated {} agents, {} events, probe disagreement {:.4f}\n",
                     report.agents.size(), report.trace.size(), report.probe_disagreement);
  for (const AgentSummary& s : report.agents) {
    out << fmt::format("  {} model {} labels {} danger alerts {} outlier alerts {}\n",
                       s.agent_id, s.model_digest.substr(0, 12), s.labels, s.danger_alerts,
                       s.outlier_alerts);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string data;
  std::string schema;
  std::string incidents;
};

int Validate(const ValidateArgs& a, std::ostream& out) {
  const FeatureSchema schema = SchemaOrDefault(a.schema);
  Dataset dataset{schema, LoadSurveyCsv(a.data, schema), {}};
  if (!a.incidents.empty()) dataset.labels = LoadIncidentsCsv(a.incidents);
  const ValidationReport report = ValidateDataset(dataset);
  json violations = json::array();
  for (const Violation& v : report.violations) violations.push_back(ViolationToJson(v));
  out << json{{"records", dataset.records.size()},
              {"labels", dataset.labels.size()},
              {"flagged_records", report.FlaggedRecords().size()},
              {"violations", violations}}
             .dump(2)
      << "\n";
  return report.empty() ? kExitOk : kExitFindings;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
};

int Serve(const ServeArgs& a, std::ostream& out) {
  GatewayConfig config = GatewayConfig::FromEnvironment();
  if (!a.data_dir.empty()) config.data_dir = a.data_dir;
  Gateway gateway(config);
  HttpServer server(gateway);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int port = server.Bind(a.bind, a.port);
  if (port < 0) {
    throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", a.bind, a.port), "port");
  }
  out << fmt::format("listening on http://{}:{} (data dir {})\n", a.bind, port,
                     config.data_dir.string())
      << std::flush;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, stopping", sig);
    server.Stop();
  });
  const bool ok = server.Serve();
  if (waiter.joinable()) {
    // Serve() also returns on errors; wake the waiter so it can exit.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return ok ? kExitOk : kExitError;
}

}  // namespace

int CliRun(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sentinel: vulnerability scoring engine, survey analytics and simulator",
               "sentinel"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "PCA, clustering, similarity and "
                                                    "correlation reports for a survey CSV");
  analyze_cmd->add_option("--data", analyze.data, "survey CSV")->required();
  analyze_cmd->add_option("--schema", analyze.schema, "schema JSON (default schema if absent)");
  analyze_cmd->add_option("--out", analyze.out, "output directory")->required();
  analyze_cmd->add_option("--clusters", analyze.clusters, "clusters to cut")
      ->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--dims", analyze.dims,
                          "PCA dimensions for clustering (default: 85% variance)");
  analyze_cmd->add_option("--tau", analyze.tau, "correlation edge threshold")
      ->check(CLI::Range(-1.0, 1.0));

  GenerateArgs generate;
  auto* generate_cmd = app.add_subcommand("generate", "synthetic survey cohort");
  generate_cmd->add_option("--config", generate.config,
                           "generator config JSON (default: calibrated config)");
  generate_cmd->add_option("--schema", generate.schema, "schema JSON");
  generate_cmd->add_option("--seed", generate.seed, "generator seed");
  generate_cmd->add_option("--n", generate.n, "number of valid records");
  generate_cmd->add_option("--out", generate.out, "output directory")->required();

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "multi-agent sync simulation");
  simulate_cmd->add_option("--config", simulate.config, "simulation config JSON")
      ->required();
  simulate_cmd->add_option("--seed", simulate.seed, "overrides the config seed");
  simulate_cmd->add_option("--out", simulate.out, "output directory")->required();

  ValidateArgs validate;
  auto* validate_cmd = app.add_subcommand("validate", "schema validation of survey data");
  validate_cmd->add_option("--data", validate.data, "survey CSV")->required();
  validate_cmd->add_option("--schema", validate.schema, "schema JSON");
  validate_cmd->add_option("--incidents", validate.incidents, "incidents CSV");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "JSON-over-HTTP gateway");
  serve_cmd->add_option("--bind", serve.bind, "bind address");
  serve_cmd->add_option("--port", serve.port, "port (0 = ephemeral)");
  serve_cmd->add_option("--data-dir", serve.data_dir,
                        "persistence root (default: $SENTINEL_DATA_DIR)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitError;
  }

  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
  try {
    if (*analyze_cmd) return Analyze(analyze, out);
    if (*generate_cmd) return GenerateCmd(generate, out);
    if (*simulate_cmd) return Simulate(simulate, out);
    if (*validate_cmd) return Validate(validate, out);
    if (*serve_cmd) return Serve(serve, out);
  } catch (const Error& e) {
    err << fmt::format("error [{}]{}: {}\n", ErrorCodeName(e.code()),
                       e.field().empty() ? "" : fmt::format(" ({})", e.field()), e.what());
    return kExitError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace sentinel
