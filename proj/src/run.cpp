#include "axp/run.hpp"

#include <random>
#include <set>

namespace axp {

namespace fs = std::filesystem;

std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendKind::Oracle: return std::make_unique<OracleBackend>(spec.oracle);
    case BackendKind::Scripted:
      return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(spec.fixtures));
    case BackendKind::RemoteHttp: return std::make_unique<RemoteHttpBackend>(spec.remote);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown backend kind");
}

Json score_record_to_json(const ScoreRecord& r) {
  Json j;
  j["id"] = r.score.instance_id;
  j["condition"] = to_string(r.condition);
  j["kind"] = to_string(r.kind);
  j["category"] = to_string(r.category);
  j["entry_id"] = r.entry_id;
  j["accuracy"] = r.score.accuracy;
  Json items = Json::array();
  for (bool b : r.score.items) items.push_back(b);
  j["items"] = std::move(items);
  j["parse_failed"] = r.score.parse_failed;
  j["diagnostic"] = r.score.diagnostic;
  return j;
}

ScoreRecord score_record_from_json(const Json& j) {
  try {
    ScoreRecord r;
    r.score.instance_id = j.at("id").get<std::string>();
    r.condition = condition_from_string(j.at("condition").get<std::string>());
    r.kind = task_kind_from_string(j.at("kind").get<std::string>());
    r.category = category_from_string(j.at("category").get<std::string>());
    r.entry_id = j.at("entry_id").get<std::string>();
    r.score.accuracy = j.at("accuracy").get<double>();
    for (const auto& b : j.at("items")) r.score.items.push_back(b.get<bool>());
    r.score.parse_failed = j.at("parse_failed").get<bool>();
    r.score.diagnostic = j.at("diagnostic").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("score record: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, std::string("score record: ") + e.what());
  }
}

std::vector<ReportTable> build_reports(const std::vector<ScoreRecord>& records, const std::string& backend_label,
                                       const std::vector<Condition>& conditions, const std::vector<TaskKind>& tasks,
                                       const TolerancePolicy& policy) {
  std::vector<ReportTable> tables;
  for (TaskKind k : tasks) {
    ReportTable t;
    t.title = std::string(to_string(k));
    t.policy = describe_policy(policy);
    for (Condition c : conditions) {
      std::vector<InstanceScore> scores;
      std::map<std::string, Category> category_of;
      for (const auto& r : records) {
        if (r.kind == k && r.condition == c) {
          scores.push_back(r.score);
          category_of[r.score.instance_id] = r.category;
        }
      }
      if (scores.empty()) continue;
      t.rows.push_back(aggregate(scores, category_of, condition_label(backend_label, c)));
    }
    if (!t.rows.empty()) tables.push_back(std::move(t));
  }
  return tables;
}

std::string reports_markdown(const std::vector<ReportTable>& tables) {
  std::string out = "# Results\n";
  for (const auto& t : tables) out += "\n" + emit_markdown(t);
  return out;
}

std::string reports_csv(const std::vector<ReportTable>& tables) {
  std::string out;
  std::string last_header;
  for (const auto& t : tables) {
    const std::string csv = emit_csv(t);
    std::size_t pos = csv.find('\n');
    const std::string header = "task," + csv.substr(0, pos);
    if (header != last_header) {
      out += header + "\n";
      last_header = header;
    }
    for (std::size_t start = pos + 1; start < csv.size();) {
      const std::size_t end = csv.find('\n', start);
      out += t.title + "," + csv.substr(start, end - start) + "\n";
      start = end + 1;
    }
  }
  return out;
}

namespace {

Json backend_meta(const BackendSpec& b, const std::string& label) {
  Json j;
  j["kind"] = to_string(b.kind);
  j["label"] = label;
  switch (b.kind) {
    case BackendKind::Oracle:
      j["noise_sigma"] = b.oracle.noise_sigma;
      j["seed"] = b.oracle.seed;
      break;
    case BackendKind::Scripted: j["fixtures"] = b.fixtures.generic_string(); break;
    case BackendKind::RemoteHttp:
      j["endpoint"] = b.remote.endpoint;
      j["model"] = b.remote.model;
      j["token_env"] = b.remote.token_env;
      j["timeout_s"] = b.remote.timeout_s;
      j["max_retries"] = b.remote.max_retries;
      j["max_tokens"] = b.remote.max_tokens;
      j["concurrency"] = b.dispatch.concurrency;
      j["rate_per_s"] = b.dispatch.rate_per_s;
      break;
  }
  return j;
}

Json tolerance_json(const TolerancePolicy& p) {
  return {{"point_rel_tol", p.point_rel_tol}, {"pixel_tol", p.pixel_tol}, {"iou_threshold", p.iou_threshold}};
}

std::string label_for(const RunConfig& c, const Backend& b) { return c.backend.label.empty() ? b.name() : c.backend.label; }

struct LoadedEntry {
  DatasetEntry entry;
  std::vector<Image> views;
};

TaskInstance build_instance(const LoadedEntry& le, TaskKind kind, const RunConfig& config, const TaskOptions& opts) {
  const DatasetEntry& e = le.entry;
  switch (kind) {
    case TaskKind::Reconstruction: {
      std::set<std::string> known{e.object.gt_keypoints.front().label};
      std::set<std::string> queried;
      for (std::size_t i = 1; i < e.object.gt_keypoints.size(); ++i) queried.insert(e.object.gt_keypoints[i].label);
      return make_reconstruction_instance(e, le.views, 0, known, queried, opts);
    }
    case TaskKind::Matching: {
      std::mt19937_64 rng(config.seed ^ stable_hash(e.id));
      const auto& kps = e.object.gt_keypoints;
      const std::string label = kps[rng() % kps.size()].label;
      std::vector<int> targets;
      for (int v = 1; v < static_cast<int>(e.views.size()); ++v) targets.push_back(v);
      return make_matching_instance(e, le.views, 0, targets, label, opts);
    }
    case TaskKind::Detection: return make_detection_instance(e, le.views, 0, config.reference_dims, opts);
  }
  throw Error(ErrorCode::InvalidTask, "unknown task kind");
}

void write_instance(const fs::path& run_dir, const TaskInstance& inst) {
  const fs::path dir = run_dir / "instances" / inst.id;
  fs::create_directories(dir);
  std::vector<std::string> paths;
  const auto images = prompt_images(inst);
  for (std::size_t k = 0; k < images.size(); ++k) {
    const std::string name = "image_" + std::to_string(k) + ".png";
    write_png(dir / name, images[k]);
    paths.push_back(inst.id + "/" + name);
  }
  write_file_atomic(run_dir / "instances" / (inst.id + ".json"), dump_json(instance_to_json(inst, paths)));
}

void require_fresh_or_resumable(const RunConfig& config, const Json& meta) {
  std::error_code ec;
  const fs::path& dir = config.run_dir;
  if (config.resume) {
    const fs::path mp = dir / "run_meta.json";
    if (!fs::exists(mp, ec)) throw Error(ErrorCode::InvalidConfig, "nothing to resume in " + dir.string());
    if (parse_json(read_text_file(mp)) != meta) {
      throw Error(ErrorCode::InvalidConfig, "run_meta.json in " + dir.string() + " differs from this configuration");
    }
    return;
  }
  if (fs::exists(dir, ec) && !(fs::is_directory(dir, ec) && fs::is_empty(dir, ec))) {
    throw Error(ErrorCode::IoFailure, "run directory " + dir.string() + " is not empty (use --resume to continue)");
  }
}

}  // namespace

Json run_meta(const RunConfig& config, const std::string& backend_label, int template_version) {
  Json j;
  j["tool"] = "axp";
  j["version"] = AXP_VERSION;
  j["template_version"] = template_version;
  j["templates"] = config.templates.empty() ? std::string("default") : config.templates.generic_string();
  Json c;
  c["dataset"] = config.dataset_dir.generic_string();
  c["backend"] = backend_meta(config.backend, backend_label);
  Json tasks = Json::array();
  for (TaskKind k : config.tasks) tasks.push_back(to_string(k));
  c["tasks"] = std::move(tasks);
  Json conds = Json::array();
  for (Condition k : config.conditions) conds.push_back(to_string(k));
  c["conditions"] = std::move(conds);
  c["tolerance"] = tolerance_json(config.tolerance);
  c["seed"] = config.seed;
  c["reference_dims"] = config.reference_dims;
  j["config"] = std::move(c);
  return j;
}

RunResult run_experiment(const RunConfig& config) {
  const auto backend = make_backend(config.backend);
  return run_experiment(config, *backend);
}

RunResult run_experiment(const RunConfig& config, const Backend& backend) {
  if (config.run_dir.empty()) throw Error(ErrorCode::InvalidConfig, "run directory is required");
  if (config.tasks.empty()) throw Error(ErrorCode::InvalidConfig, "no tasks selected");
  if (config.conditions.empty()) throw Error(ErrorCode::InvalidConfig, "no conditions selected");
  validate_policy(config.tolerance);

  const TemplateSet templates = config.templates.empty() ? default_templates() : load_templates(config.templates);
  const std::string label = label_for(config, backend);
  const Json meta = run_meta(config, label, templates.version);
  require_fresh_or_resumable(config, meta);

  const fs::path& dir = config.run_dir;
  std::error_code ec;
  for (const char* sub : {"instances", "exchanges", "scores"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  write_file_atomic(dir / "run_meta.json", dump_json(meta));
  write_file_atomic(dir / "RESUME", std::string("incomplete run; rerun with --resume to continue\n"));

  const Manifest manifest = load_manifest(config.dataset_dir);
  std::vector<LoadedEntry> entries;
  for (const auto& me : manifest.entries) {
    LoadedEntry le;
    le.entry = load_entry(config.dataset_dir / me.annotation);
    for (int v = 0; v < static_cast<int>(le.entry.views.size()); ++v) {
      le.views.push_back(load_view_image(config.dataset_dir, me, v));
    }
    entries.push_back(std::move(le));
  }
  if (entries.empty()) throw Error(ErrorCode::EmptyInput, "dataset " + config.dataset_dir.string() + " has no entries");

  DispatchConfig dcfg = config.backend.dispatch;
  if (backend.kind() != BackendKind::RemoteHttp) dcfg = {1, 0.0, 1.0};

  RunResult result;
  for (Condition cond : config.conditions) {
    for (TaskKind kind : config.tasks) {
      TaskOptions opts{cond, config.tolerance, &templates};
      std::vector<TaskInstance> batch;
      std::vector<ScoreRecord> batch_records;
      std::vector<std::size_t> pending;
      for (const auto& le : entries) {
        TaskInstance inst = build_instance(le, kind, config, opts);
        ScoreRecord rec{{}, cond, kind, inst.category, inst.entry_id};
        const fs::path score_file = dir / "scores" / (inst.id + ".json");
        if (config.resume && fs::exists(score_file, ec)) {
          rec = score_record_from_json(parse_json(read_text_file(score_file)));
          ++result.resumed;
        } else {
          write_instance(dir, inst);
          pending.push_back(batch.size());
        }
        batch_records.push_back(std::move(rec));
        batch.push_back(std::move(inst));
      }

      std::vector<const TaskInstance*> to_send;
      for (std::size_t i : pending) to_send.push_back(&batch[i]);
      const DispatchOutcome out = dispatch(backend, to_send, dcfg, [&](std::size_t k, const ModelReply& reply) {
        const TaskInstance& inst = *to_send[k];
        Json ex;
        ex["id"] = inst.id;
        ex["backend"] = to_string(reply.kind);
        ex["reply"] = reply.text;
        ex["latency_ms"] = reply.latency_ms;
        if (reply.raw_exchange) {
          ex["status"] = reply.raw_exchange->status;
          ex["attempts"] = reply.raw_exchange->attempts;
          write_file_atomic(dir / "exchanges" / (inst.id + ".request.json"), reply.raw_exchange->request_body);
          write_file_atomic(dir / "exchanges" / (inst.id + ".response.json"), reply.raw_exchange->response_body);
        }
        write_file_atomic(dir / "exchanges" / (inst.id + ".json"), dump_json(ex));

        ScoreRecord& rec = batch_records[pending[k]];
        rec.score = score_instance(inst, parse_answer(inst, reply.text));
        write_file_atomic(dir / "scores" / (inst.id + ".json"), dump_json(score_record_to_json(rec)));
        ++result.sent;
      });
      if (out.error) std::rethrow_exception(out.error);
      for (auto& r : batch_records) result.records.push_back(std::move(r));
    }
  }

  Json scores = Json::array();
  Json replies = Json::object();
  for (const auto& r : result.records) {
    scores.push_back(score_record_to_json(r));
    const fs::path ex = dir / "exchanges" / (r.score.instance_id + ".json");
    if (fs::exists(ex, ec)) replies[r.score.instance_id] = parse_json(read_text_file(ex)).value("reply", "");
  }
  write_file_atomic(dir / "scores.json", dump_json(scores));
  write_file_atomic(dir / "exchanges" / "replies.json", dump_json(replies));

  result.tables = build_reports(result.records, label, config.conditions, config.tasks, config.tolerance);
  write_file_atomic(dir / "report.md", reports_markdown(result.tables));
  write_file_atomic(dir / "report.csv", reports_csv(result.tables));
  fs::remove(dir / "RESUME", ec);
  return result;
}

std::vector<ReportTable> evaluate_run(const fs::path& run_dir) {
  const Json meta = parse_json(read_text_file(run_dir / "run_meta.json"));
  const Json scores = parse_json(read_text_file(run_dir / "scores.json"));
  try {
    const Json& c = meta.at("config");
    std::vector<TaskKind> tasks;
    for (const auto& t : c.at("tasks")) tasks.push_back(task_kind_from_string(t.get<std::string>()));
    std::vector<Condition> conds;
    for (const auto& t : c.at("conditions")) conds.push_back(condition_from_string(t.get<std::string>()));
    const Json& tol = c.at("tolerance");
    TolerancePolicy policy{tol.at("point_rel_tol").get<double>(), tol.at("pixel_tol").get<double>(),
                           tol.at("iou_threshold").get<double>()};
    std::vector<ScoreRecord> records;
    for (const auto& s : scores) records.push_back(score_record_from_json(s));
    const auto tables =
        build_reports(records, c.at("backend").at("label").get<std::string>(), conds, tasks, policy);
    write_file_atomic(run_dir / "report.md", reports_markdown(tables));
    write_file_atomic(run_dir / "report.csv", reports_csv(tables));
    return tables;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("run_meta.json: ") + e.what());
  }
}

}  // namespace axp
