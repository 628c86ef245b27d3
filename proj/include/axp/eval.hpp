#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "axp/parse.hpp"
#include "axp/scenegen.hpp"

namespace axp {

struct TolerancePolicy {
  /// Fraction of the object bounding-box diagonal.
  double point_rel_tol = 0.10;
  double pixel_tol = 10.0;
  double iou_threshold = 0.5;

  friend bool operator==(const TolerancePolicy&, const TolerancePolicy&) = default;
};

/// Throws InvalidConfig when a field is outside its bounds.
void validate_policy(const TolerancePolicy& policy);

/// One-line human-readable form recorded in report headers.
std::string describe_policy(const TolerancePolicy& policy);

struct InstanceScore {
  std::string instance_id;
  std::vector<bool> items;
  double accuracy = 0.0;
  bool parse_failed = false;
  std::string diagnostic;
};

/// Correct iff the label is present and within point_rel_tol * diag (inclusive).
InstanceScore score_reconstruction(const std::string& instance_id, const std::map<std::string, Vec3>& predicted,
                                   const std::map<std::string, Vec3>& gt, double diag, const TolerancePolicy& policy);

/// Ground truth for one matching target view.
struct MatchTruth {
  int view = 0;  // index into the instance's images
  std::string label;
  Pixel pixel;
};

/// Label form: the chosen candidate equals the true one. Pixel form: the named
/// pixel is within pixel_tol (inclusive). A view answered in either form counts.
InstanceScore score_matching(const std::string& instance_id, const std::map<int, std::string>& choices,
                             const std::map<int, Pixel>& pixels, const std::vector<MatchTruth>& gt,
                             const TolerancePolicy& policy);

double iou_aabb(const Box3D& a, const Box3D& b);

/// A missing axis is a parse failure; otherwise correct iff IoU >= threshold.
InstanceScore score_detection(const std::string& instance_id, const std::map<Axis, AxisRange>& ranges,
                              const Box3D& gt, const TolerancePolicy& policy);

struct EvalReport {
  std::string condition;
  std::map<Category, double> per_category;
  double overall = 0.0;
  std::size_t instances = 0;
};

/// Per-category means and an instance-weighted overall mean. Throws EmptyInput.
EvalReport aggregate(const std::vector<InstanceScore>& scores, const std::map<std::string, Category>& category_of,
                     const std::string& condition);

/// Round half up to two decimals: 0.855 -> "0.86".
std::string format_score(double v);

struct ReportTable {
  std::string title;
  std::string policy;  // empty to omit the header line
  std::vector<EvalReport> rows;
};

/// Columns are the categories present in any row, in canonical order, plus
/// "overall" when more than one category is present.
std::string emit_markdown(const ReportTable& table);
std::string emit_csv(const ReportTable& table);

}  // namespace axp
