#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "axp/eval.hpp"
#include "axp/overlay.hpp"
#include "axp/scenegen.hpp"
#include "axp/schema.hpp"

namespace axp {

enum class TaskKind { Reconstruction = 0, Matching = 1, Detection = 2 };

inline constexpr std::array<TaskKind, 3> kAllTaskKinds = {TaskKind::Reconstruction, TaskKind::Matching,
                                                          TaskKind::Detection};

std::string_view to_string(TaskKind k);
TaskKind task_kind_from_string(std::string_view s);

/// Overlay variant of an experiment: no mark, the full mark, the mark without
/// tick strokes and numbers. Prompts are identical across conditions.
enum class Condition { Baseline = 0, Full = 1, NoScale = 2 };

inline constexpr std::array<Condition, 3> kAllConditions = {Condition::Baseline, Condition::Full,
                                                            Condition::NoScale};

/// "baseline", "3dap", "3dap-scale".
std::string_view to_string(Condition c);
Condition condition_from_string(std::string_view s);
/// Report row label: "<backend>", "<backend>+3DAP", "<backend>+3DAP-scale".
std::string condition_label(std::string_view backend, Condition c);

struct PromptTemplate {
  TaskKind kind = TaskKind::Reconstruction;
  std::string text;
};

struct TemplateSet {
  int version = 0;
  std::map<TaskKind, PromptTemplate> templates;

  const PromptTemplate& get(TaskKind k) const;
};

/// `[version N]` followed by `[template <kind>] ... [/template]` sections.
/// Throws TemplateSyntax.
TemplateSet parse_templates(std::string_view text);
TemplateSet load_templates(const std::filesystem::path& path);
/// The set shipped in templates/default_templates.txt, compiled in.
const TemplateSet& default_templates();

/// Single-pass substitution of {name} placeholders. "{{" and "}}" produce
/// literal braces; bound values are inserted verbatim and never rescanned.
/// Throws UnboundPlaceholder for a missing binding, TemplateSyntax for a stray brace.
std::string compose_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& bindings);

/// Shortest round-trip decimal form ("10", "45.5", "-3.25").
std::string format_number(double v);
/// "(x, y, z)" with format_number components.
std::string format_tuple(const Vec3& v);

/// 64-bit FNV-1a; stable across platforms, used to derive per-item seeds.
std::uint64_t stable_hash(std::string_view s);

struct MatchCandidate {
  std::string label;  // P1, P2, ... numbered across all target images
  std::string keypoint;
  Pixel pixel;
};

struct TaskInstance {
  std::string id;
  TaskKind kind = TaskKind::Reconstruction;
  Condition condition = Condition::Full;
  std::string entry_id;
  Category category = Category::Chair;
  std::vector<AnnotatedImage> images;
  std::string prompt;
  int template_version = 0;
  TolerancePolicy tolerance;
  double object_diag = 0.0;

  std::map<std::string, Vec3> gt_points;
  std::vector<MatchTruth> gt_matches;
  Box3D gt_box;
  /// Image index -> candidates drawn on that image (matching only).
  std::map<int, std::vector<MatchCandidate>> candidates;
};

struct TaskOptions {
  Condition condition = Condition::Full;
  TolerancePolicy tolerance;
  const TemplateSet* templates = nullptr;  // nullptr selects default_templates()
};

/// Renders each view of the entry with render_view at the camera's image size.
std::vector<Image> render_entry_views(const DatasetEntry& entry);

/// One image of `view` with known and queried keypoints drawn; the prompt gives
/// coordinates for the known ones only. Throws UnknownLabel, EmptyKnownSet,
/// InvalidTask (overlap), ViewIndexOutOfRange.
TaskInstance make_reconstruction_instance(const DatasetEntry& entry, const std::vector<Image>& views, int view,
                                          const std::set<std::string>& known, const std::set<std::string>& queried,
                                          const TaskOptions& options = {});

/// Image 0 is the reference view with the mark and the labelled keypoint;
/// images 1.. are the target views carrying candidate markers only.
TaskInstance make_matching_instance(const DatasetEntry& entry, const std::vector<Image>& views, int ref_view,
                                    const std::vector<int>& target_views, const std::string& label,
                                    const TaskOptions& options = {});

TaskInstance make_detection_instance(const DatasetEntry& entry, const std::vector<Image>& views, int view,
                                     bool reference_dims_in_prompt, const TaskOptions& options = {});

/// Images as sent to a model, in instance order.
std::vector<Image> prompt_images(const TaskInstance& inst);

/// The exact reply a perfect model would give in the demanded answer schema.
std::string format_ground_truth_answer(const TaskInstance& inst);

/// Extracts the structured answer relevant to the instance's kind.
ParsedAnswer parse_answer(const TaskInstance& inst, std::string_view reply);

InstanceScore score_instance(const TaskInstance& inst, const ParsedAnswer& answer);

/// `image_paths` are recorded in place of pixel data, one per image.
Json instance_to_json(const TaskInstance& inst, const std::vector<std::string>& image_paths);

}  // namespace axp
