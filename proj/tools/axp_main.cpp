#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "axp/annotation_service.hpp"
#include "axp/run.hpp"

namespace {

namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kBackend = 4, kBind = 5 };

int exit_code_for(axp::ErrorCode c) {
  using axp::ErrorCode;
  switch (c) {
    case ErrorCode::IoFailure:
    case ErrorCode::SchemaError: return kIo;
    case ErrorCode::Timeout:
    case ErrorCode::AuthFailure:
    case ErrorCode::RateLimited:
    case ErrorCode::BackendFailure:
    case ErrorCode::MissingFixture: return kBackend;
    default: return kUsage;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  return out;
}

struct RunFlags {
  std::string dataset;
  std::string backend = "oracle";
  std::string fixtures;
  double noise = 0.0;
  std::uint64_t oracle_seed = 0;
  std::string endpoint;
  std::string model;
  std::string token_env = "AXP_API_TOKEN";
  double timeout = 120.0;
  int retries = 3;
  int concurrency = 1;
  double rate = 0.5;
  std::string label;
  std::string tasks = "reconstruction,matching,detection";
  std::string conditions;
  std::string run_dir;
  std::uint64_t seed = 1;
  double point_tol = 0.10;
  double pixel_tol = 10.0;
  double iou = 0.5;
  bool no_reference_dims = false;
  std::string templates;
  bool resume = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, const std::string& default_conditions) {
  f.conditions = default_conditions;
  cmd->add_option("--dataset", f.dataset, "Dataset directory")->required();
  cmd->add_option("--run-dir", f.run_dir, "Output run directory (must be empty unless --resume)")->required();
  cmd->add_option("--backend", f.backend, "oracle | scripted | remote")
      ->check(CLI::IsMember({"oracle", "scripted", "remote"}));
  cmd->add_option("--fixtures", f.fixtures, "Scripted replies: JSON object {instance id: reply}");
  cmd->add_option("--noise", f.noise, "Oracle noise sigma")->check(CLI::NonNegativeNumber);
  cmd->add_option("--oracle-seed", f.oracle_seed, "Oracle noise seed");
  cmd->add_option("--endpoint", f.endpoint, "Remote endpoint URL");
  cmd->add_option("--model", f.model, "Remote model name");
  cmd->add_option("--token-env", f.token_env, "Environment variable holding the bearer token");
  cmd->add_option("--timeout", f.timeout, "Remote request timeout in seconds");
  cmd->add_option("--retries", f.retries, "Remote retries");
  cmd->add_option("--concurrency", f.concurrency, "Remote requests in flight")->check(CLI::PositiveNumber);
  cmd->add_option("--rate", f.rate, "Remote requests per second");
  cmd->add_option("--label", f.label, "Report row label (defaults to the backend name)");
  cmd->add_option("--tasks", f.tasks, "Comma-separated task kinds");
  cmd->add_option("--conditions", f.conditions, "Comma-separated: baseline, 3dap, 3dap-scale");
  cmd->add_option("--seed", f.seed, "Instance selection seed");
  cmd->add_option("--point-tol", f.point_tol, "Reconstruction tolerance as a fraction of the object diagonal");
  cmd->add_option("--pixel-tol", f.pixel_tol, "Matching pixel tolerance");
  cmd->add_option("--iou", f.iou, "Detection IoU threshold");
  cmd->add_flag("--no-reference-dims", f.no_reference_dims, "Omit reference dimensions from detection prompts");
  cmd->add_option("--templates", f.templates, "Prompt template file");
  cmd->add_flag("--resume", f.resume, "Continue an interrupted run");
}

axp::RunConfig to_config(const RunFlags& f) {
  axp::RunConfig c;
  c.dataset_dir = f.dataset;
  c.run_dir = f.run_dir;
  if (f.backend == "oracle") {
    c.backend.kind = axp::BackendKind::Oracle;
  } else if (f.backend == "scripted") {
    c.backend.kind = axp::BackendKind::Scripted;
    if (f.fixtures.empty()) throw axp::Error(axp::ErrorCode::InvalidConfig, "--fixtures is required for scripted");
  } else {
    c.backend.kind = axp::BackendKind::RemoteHttp;
  }
  c.backend.oracle = {f.noise, f.oracle_seed};
  c.backend.fixtures = f.fixtures;
  c.backend.remote.endpoint = f.endpoint;
  c.backend.remote.model = f.model;
  c.backend.remote.token_env = f.token_env;
  c.backend.remote.timeout_s = f.timeout;
  c.backend.remote.max_retries = f.retries;
  c.backend.dispatch.concurrency = f.concurrency;
  c.backend.dispatch.rate_per_s = f.rate;
  c.backend.label = f.label;
  c.tasks.clear();
  for (const auto& t : split_list(f.tasks)) c.tasks.push_back(axp::task_kind_from_string(t));
  c.conditions.clear();
  for (const auto& t : split_list(f.conditions)) c.conditions.push_back(axp::condition_from_string(t));
  c.seed = f.seed;
  c.tolerance = {f.point_tol, f.pixel_tol, f.iou};
  c.reference_dims = !f.no_reference_dims;
  c.templates = f.templates;
  c.resume = f.resume;
  return c;
}

int do_run(const RunFlags& f) {
  const axp::RunConfig config = to_config(f);
  const axp::RunResult r = axp::run_experiment(config);
  std::cout << axp::reports_markdown(r.tables);
  std::cerr << "sent " << r.sent << ", resumed " << r.resumed << "; results in " << config.run_dir.string() << "\n";
  return kOk;
}

int do_serve(const axp::ServiceConfig& cfg) {
  std::error_code ec;
  if (!fs::is_directory(cfg.images_dir, ec)) {
    std::cerr << "error: image directory " << cfg.images_dir << " does not exist\n";
    return kIo;
  }
  // Route SIGINT/SIGTERM to a watcher thread so shutdown runs outside a signal handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  axp::AnnotationService service(cfg);
  if (!service.bind()) {
    std::cerr << "error: cannot bind " << cfg.host << ":" << cfg.port << "\n";
    return kBind;
  }
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  std::cerr << "serving " << cfg.images_dir.string() << " on http://" << cfg.host << ":" << service.port() << "\n";
  service.serve();
  // serve() can also return without a signal (e.g. listener failure); wake the watcher.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  service.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D axis prompts: overlay rendering, task generation and evaluation"};
  app.set_version_flag("--version", AXP_VERSION);
  app.require_subcommand(1);

  axp::DatasetConfig gen;
  std::string gen_out;
  auto* cmd_gen = app.add_subcommand("gen-dataset", "Generate a synthetic multi-view furniture dataset");
  cmd_gen->add_option("--out", gen_out, "Output directory")->required();
  cmd_gen->add_option("--per-category", gen.per_category, "Entries per category");
  cmd_gen->add_option("--views", gen.views_per_entry, "Views per entry (>= 2)");
  cmd_gen->add_option("--seed", gen.seed, "Base seed");
  cmd_gen->add_option("--width", gen.rig.width, "Image width");
  cmd_gen->add_option("--height", gen.rig.height, "Image height");
  cmd_gen->add_flag("--force", gen.force, "Write into a non-empty directory");

  std::string ann_image, ann_spec, ann_out;
  auto* cmd_ann = app.add_subcommand("annotate", "Render the axis overlay for an annotation draft");
  cmd_ann->add_option("--image", ann_image, "Input PNG")->required();
  cmd_ann->add_option("--spec", ann_spec, "Draft JSON, or a saved annotation record")->required();
  cmd_ann->add_option("--out", ann_out, "Output PNG")->required();

  RunFlags run_flags, ablate_flags;
  auto* cmd_run = app.add_subcommand("run", "Build, send, parse and score task instances");
  add_run_flags(cmd_run, run_flags, "baseline,3dap,3dap-scale");
  auto* cmd_ablate = app.add_subcommand("ablate", "Scale-mark ablation: 3DAP with and without scale");
  add_run_flags(cmd_ablate, ablate_flags, "3dap-scale,3dap");

  std::string eval_dir;
  auto* cmd_eval = app.add_subcommand("evaluate", "Recompute reports from a run directory");
  cmd_eval->add_option("--run-dir", eval_dir, "Run directory")->required();

  axp::ServiceConfig serve;
  std::string serve_images, serve_ann, serve_ui;
  auto* cmd_serve = app.add_subcommand("serve", "Serve the annotation API and UI");
  cmd_serve->add_option("--images", serve_images, "Image directory")->required();
  cmd_serve->add_option("--port", serve.port, "TCP port")->check(CLI::Range(1, 65535));
  cmd_serve->add_option("--host", serve.host, "Listen address");
  cmd_serve->add_option("--annotations", serve_ann, "Annotation directory (default <images>/.annotations)");
  cmd_serve->add_option("--ui", serve_ui, "Static UI bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (cmd_gen->parsed()) {
      gen.out_dir = gen_out;
      const axp::Manifest m = axp::generate_dataset(gen);
      std::cout << "wrote " << m.entries.size() << " entries to " << gen_out << "\n";
      return kOk;
    }
    if (cmd_ann->parsed()) {
      axp::Json spec = axp::parse_json(axp::read_text_file(ann_spec));
      if (spec.is_object() && spec.contains("draft")) spec = spec["draft"];
      std::vector<axp::FieldError> errors;
      const axp::AnnotationDraft d = axp::draft_from_json(spec, errors);
      std::optional<std::vector<std::uint8_t>> png;
      if (errors.empty()) png = axp::render_draft_png(ann_image, d, errors);
      if (!png) {
        for (const auto& e : errors) std::cerr << "error: " << e.field << ": " << e.message << "\n";
        return kUsage;
      }
      axp::write_file_atomic(ann_out, *png);
      return kOk;
    }
    if (cmd_run->parsed()) return do_run(run_flags);
    if (cmd_ablate->parsed()) return do_run(ablate_flags);
    if (cmd_eval->parsed()) {
      std::cout << axp::reports_markdown(axp::evaluate_run(eval_dir));
      return kOk;
    }
    if (cmd_serve->parsed()) {
      serve.images_dir = serve_images;
      serve.annotations_dir = serve_ann;
      serve.ui_dir = serve_ui;
      return do_serve(serve);
    }
  } catch (const axp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
