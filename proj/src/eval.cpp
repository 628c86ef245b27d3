#include "axp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace axp {

void validate_policy(const TolerancePolicy& p) {
  if (!(p.point_rel_tol > 0.0 && p.point_rel_tol <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "point_rel_tol must be in (0, 1]");
  }
  if (!(p.pixel_tol >= 0.0) || !std::isfinite(p.pixel_tol)) {
    throw Error(ErrorCode::InvalidConfig, "pixel_tol must be >= 0");
  }
  if (!(p.iou_threshold > 0.0 && p.iou_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "iou_threshold must be in (0, 1]");
  }
}

std::string describe_policy(const TolerancePolicy& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "point_rel_tol=%g pixel_tol=%g iou_threshold=%g", p.point_rel_tol, p.pixel_tol,
                p.iou_threshold);
  return buf;
}

namespace {

void finish(InstanceScore& s) {
  if (s.parse_failed || s.items.empty()) {
    s.accuracy = 0.0;
    return;
  }
  const auto correct = std::count(s.items.begin(), s.items.end(), true);
  s.accuracy = static_cast<double>(correct) / static_cast<double>(s.items.size());
}

}  // namespace

InstanceScore score_reconstruction(const std::string& instance_id, const std::map<std::string, Vec3>& predicted,
                                   const std::map<std::string, Vec3>& gt, double diag, const TolerancePolicy& policy) {
  InstanceScore s;
  s.instance_id = instance_id;
  const double tol = policy.point_rel_tol * diag;
  std::size_t found = 0;
  for (const auto& [label, truth] : gt) {
    const auto it = predicted.find(label);
    if (it == predicted.end()) {
      s.items.push_back(false);
      continue;
    }
    ++found;
    s.items.push_back((it->second - truth).norm() <= tol);
  }
  if (found == 0) {
    s.parse_failed = true;
    s.diagnostic = "no queried label found in the answer";
  }
  finish(s);
  return s;
}

InstanceScore score_matching(const std::string& instance_id, const std::map<int, std::string>& choices,
                             const std::map<int, Pixel>& pixels, const std::vector<MatchTruth>& gt,
                             const TolerancePolicy& policy) {
  InstanceScore s;
  s.instance_id = instance_id;
  std::size_t answered = 0;
  for (const auto& t : gt) {
    bool ok = false;
    bool any = false;
    if (const auto c = choices.find(t.view); c != choices.end()) {
      any = true;
      ok = c->second == t.label;
    } else if (const auto p = pixels.find(t.view); p != pixels.end()) {
      any = true;
      ok = std::hypot(p->second.u - t.pixel.u, p->second.v - t.pixel.v) <= policy.pixel_tol;
    }
    answered += any ? 1 : 0;
    s.items.push_back(ok);
  }
  if (answered == 0) {
    s.parse_failed = true;
    s.diagnostic = "no choice found for any target view";
  }
  finish(s);
  return s;
}

double iou_aabb(const Box3D& a, const Box3D& b) {
  const Vec3 lo = a.min_corner.cwiseMax(b.min_corner);
  const Vec3 hi = a.max_corner.cwiseMin(b.max_corner);
  const Vec3 d = (hi - lo).cwiseMax(0.0);
  const double inter = d.x() * d.y() * d.z();
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return (a.min_corner == b.min_corner && a.max_corner == b.max_corner) ? 1.0 : 0.0;
  return inter / uni;
}

InstanceScore score_detection(const std::string& instance_id, const std::map<Axis, AxisRange>& ranges,
                              const Box3D& gt, const TolerancePolicy& policy) {
  InstanceScore s;
  s.instance_id = instance_id;
  Box3D pred;
  for (int i = 0; i < 3; ++i) {
    const auto it = ranges.find(static_cast<Axis>(i));
    if (it == ranges.end()) {
      s.parse_failed = true;
      s.diagnostic = std::string("missing ") + axis_name(static_cast<Axis>(i)) + " range";
      break;
    }
    pred.min_corner[i] = it->second.lo;
    pred.max_corner[i] = it->second.hi;
  }
  s.items.push_back(!s.parse_failed && iou_aabb(pred, gt) >= policy.iou_threshold);
  finish(s);
  return s;
}

EvalReport aggregate(const std::vector<InstanceScore>& scores, const std::map<std::string, Category>& category_of,
                     const std::string& condition) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no scores to aggregate for '" + condition + "'");
  EvalReport r;
  r.condition = condition;
  std::map<Category, std::pair<double, std::size_t>> sums;
  double total = 0.0;
  for (const auto& s : scores) {
    const auto it = category_of.find(s.instance_id);
    if (it == category_of.end()) throw Error(ErrorCode::InvalidConfig, "no category for " + s.instance_id);
    auto& [sum, n] = sums[it->second];
    sum += s.accuracy;
    ++n;
    total += s.accuracy;
  }
  for (const auto& [c, sn] : sums) r.per_category[c] = sn.first / static_cast<double>(sn.second);
  r.instances = scores.size();
  r.overall = total / static_cast<double>(scores.size());
  return r;
}

std::string format_score(double v) {
  // The epsilon absorbs binary representation error (0.855 is stored as 0.85499...).
  const double cents = std::floor(v * 100.0 + 0.5 + 1e-9);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", cents / 100.0);
  return buf;
}

namespace {

struct Columns {
  std::vector<Category> categories;
  bool overall = false;
};

Columns columns_of(const ReportTable& t) {
  std::set<Category> present;
  for (const auto& r : t.rows) {
    for (const auto& [c, v] : r.per_category) present.insert(c);
  }
  Columns cols;
  for (Category c : kAllCategories) {
    if (present.count(c)) cols.categories.push_back(c);
  }
  cols.overall = cols.categories.size() > 1;
  return cols;
}

std::vector<std::string> row_cells(const EvalReport& r, const Columns& cols) {
  std::vector<std::string> cells{r.condition};
  for (Category c : cols.categories) {
    const auto it = r.per_category.find(c);
    cells.push_back(it == r.per_category.end() ? "-" : format_score(it->second));
  }
  if (cols.overall) cells.push_back(format_score(r.overall));
  return cells;
}

std::vector<std::string> header_cells(const Columns& cols, std::string first) {
  std::vector<std::string> h{std::move(first)};
  for (Category c : cols.categories) h.emplace_back(to_string(c));
  if (cols.overall) h.emplace_back("overall");
  return h;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string emit_markdown(const ReportTable& t) {
  const Columns cols = columns_of(t);
  std::ostringstream os;
  if (!t.title.empty()) os << "## " << t.title << "\n\n";
  if (!t.policy.empty()) os << "Tolerance: " << t.policy << "\n\n";
  const auto head = header_cells(cols, "condition");
  os << "|";
  for (const auto& h : head) os << " " << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < head.size(); ++i) os << (i == 0 ? "---|" : "---:|");
  os << "\n";
  for (const auto& r : t.rows) {
    os << "|";
    for (const auto& c : row_cells(r, cols)) os << " " << c << " |";
    os << "\n";
  }
  return os.str();
}

std::string emit_csv(const ReportTable& t) {
  const Columns cols = columns_of(t);
  std::ostringstream os;
  const auto head = header_cells(cols, "condition");
  for (std::size_t i = 0; i < head.size(); ++i) os << (i ? "," : "") << head[i];
  os << "\n";
  for (const auto& r : t.rows) {
    const auto cells = row_cells(r, cols);
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace axp
