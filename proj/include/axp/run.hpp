#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "axp/backend.hpp"
#include "axp/eval.hpp"
#include "axp/tasks.hpp"

namespace axp {

struct BackendSpec {
  BackendKind kind = BackendKind::Oracle;
  OracleConfig oracle;
  std::filesystem::path fixtures;
  RemoteConfig remote;
  DispatchConfig dispatch;
  /// Report row label; empty uses the backend's own name.
  std::string label;
};

std::unique_ptr<Backend> make_backend(const BackendSpec& spec);

struct RunConfig {
  std::filesystem::path dataset_dir;
  BackendSpec backend;
  std::vector<TaskKind> tasks = {kAllTaskKinds.begin(), kAllTaskKinds.end()};
  TolerancePolicy tolerance;
  std::vector<Condition> conditions = {kAllConditions.begin(), kAllConditions.end()};
  std::filesystem::path run_dir;
  std::uint64_t seed = 1;
  bool reference_dims = true;
  /// Empty selects the compiled-in default templates.
  std::filesystem::path templates;
  bool resume = false;
};

/// Score of one instance plus the metadata needed to aggregate it later.
struct ScoreRecord {
  InstanceScore score;
  Condition condition = Condition::Full;
  TaskKind kind = TaskKind::Reconstruction;
  Category category = Category::Chair;
  std::string entry_id;
};

Json score_record_to_json(const ScoreRecord& r);
ScoreRecord score_record_from_json(const Json& j);

/// One table per task, one row per condition (in the given order).
std::vector<ReportTable> build_reports(const std::vector<ScoreRecord>& records, const std::string& backend_label,
                                       const std::vector<Condition>& conditions, const std::vector<TaskKind>& tasks,
                                       const TolerancePolicy& policy);
std::string reports_markdown(const std::vector<ReportTable>& tables);
/// Single CSV with a leading task column.
std::string reports_csv(const std::vector<ReportTable>& tables);

struct RunResult {
  std::vector<ScoreRecord> records;
  std::vector<ReportTable> tables;
  std::size_t sent = 0;     // instances sent to the backend in this invocation
  std::size_t resumed = 0;  // instances whose scores were reused
};

/// The run-directory metadata; identical metadata and an offline backend give
/// byte-identical scores.json.
Json run_meta(const RunConfig& config, const std::string& backend_label, int template_version);

/// Builds, sends, parses and scores every condition x task x entry and writes
/// the run directory:
///   run_meta.json, instances/<id>.json, instances/<id>/image_<k>.png,
///   exchanges/<id>.json (+ .request.json/.response.json for remote),
///   exchanges/replies.json, scores/<id>.json, scores.json, report.md, report.csv.
/// A RESUME marker exists while the run is incomplete. Backend failures are
/// rethrown after partial results are written.
RunResult run_experiment(const RunConfig& config);
RunResult run_experiment(const RunConfig& config, const Backend& backend);

/// Recomputes reports from <run_dir>/scores.json and run_meta.json and rewrites
/// report.md / report.csv.
std::vector<ReportTable> evaluate_run(const std::filesystem::path& run_dir);

}  // namespace axp
