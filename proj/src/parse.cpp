#include "axp/parse.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>

namespace axp {

namespace {

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
char upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }

constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";  // U+2212
constexpr std::string_view kEnDash = "\xE2\x80\x93";
constexpr std::string_view kEmDash = "\xE2\x80\x94";
constexpr std::string_view kNbsp = "\xC2\xA0";

class Scanner {
 public:
  explicit Scanner(std::string_view s) : s_(s) {}

  std::size_t size() const { return s_.size(); }
  char at(std::size_t i) const { return i < s_.size() ? s_[i] : '\0'; }
  bool starts_with(std::size_t i, std::string_view lit) const {
    return i <= s_.size() && s_.substr(i).substr(0, lit.size()) == lit;
  }
  bool word_start(std::size_t i) const { return i == 0 || !is_alnum(s_[i - 1]); }

  std::size_t skip_ws(std::size_t i) const {
    while (i < s_.size()) {
      const char c = s_[i];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++i;
      } else if (starts_with(i, kNbsp)) {
        i += kNbsp.size();
      } else {
        break;
      }
    }
    return i;
  }

  std::size_t skip_stars_ws(std::size_t i) const {
    for (;;) {
      const std::size_t j = skip_ws(i);
      if (at(j) == '*' || at(j) == '_' || at(j) == '`') {
        i = j + 1;
      } else {
        return j;
      }
    }
  }

  /// Lowercased alphabetic run starting at i (empty if none).
  std::string word_at(std::size_t i) const {
    std::string w;
    while (i < s_.size() && is_alpha(s_[i]) && w.size() < 32) w.push_back(lower(s_[i++]));
    if (i < s_.size() && is_alpha(s_[i])) return {};  // longer than any keyword we care about
    return w;
  }

  /// Decimal number with optional sign; no exponent. Advances i on success.
  bool number(std::size_t& i, double& out) const {
    std::size_t k = i;
    std::string buf;
    if (at(k) == '+') {
      ++k;
    } else if (at(k) == '-') {
      buf.push_back('-');
      ++k;
    } else if (starts_with(k, kUnicodeMinus)) {
      buf.push_back('-');
      k += kUnicodeMinus.size();
    }
    std::size_t digits = 0;
    while (is_digit(at(k)) && buf.size() < 400) {
      buf.push_back(at(k++));
      ++digits;
    }
    if (at(k) == '.' && is_digit(at(k + 1))) {
      buf.push_back('.');
      ++k;
      while (is_digit(at(k)) && buf.size() < 400) {
        buf.push_back(at(k++));
        ++digits;
      }
    }
    if (digits == 0 || is_digit(at(k))) return false;
    // Scientific notation is rejected outright rather than half-read.
    if ((at(k) == 'e' || at(k) == 'E') && (is_digit(at(k + 1)) || ((at(k + 1) == '-' || at(k + 1) == '+') && is_digit(at(k + 2))))) {
      return false;
    }
    double v = 0.0;
    const auto res = std::from_chars(buf.data(), buf.data() + buf.size(), v);
    if (res.ec != std::errc() || res.ptr != buf.data() + buf.size() || !std::isfinite(v)) return false;
    out = v == 0.0 ? 0.0 : v;  // fold -0
    i = k;
    return true;
  }

  /// Skips a known length unit after a number, if present.
  std::size_t skip_unit(std::size_t i) const {
    static const std::set<std::string> units = {"cm", "mm", "m", "in", "inch", "inches", "unit", "units",
                                                "centimeter", "centimeters", "centimetre", "centimetres",
                                                "meter", "meters", "metre", "metres", "px", "pixel", "pixels"};
    const std::size_t k = skip_ws(i);
    if (!is_alpha(at(k))) return i;
    const std::string w = word_at(k);
    if (!w.empty() && units.count(w)) return k + w.size();
    return i;
  }

  /// `( n , n , ... )` with `count` numbers; '[' ']' also accepted.
  bool tuple(std::size_t& i, int count, double* out) const {
    std::size_t k = i;
    const char open = at(k);
    if (open != '(' && open != '[') return false;
    const char close = open == '(' ? ')' : ']';
    ++k;
    for (int n = 0; n < count; ++n) {
      k = skip_ws(k);
      if (!number(k, out[n])) return false;
      k = skip_unit(k);
      k = skip_ws(k);
      const char want = n + 1 < count ? ',' : close;
      if (at(k) != want) return false;
      ++k;
    }
    i = k;
    return true;
  }

 private:
  std::string_view s_;
};

const std::set<std::string>& point_label_stopwords() {
  static const std::set<std::string> w = {"is", "at", "are", "the", "and", "of", "to", "be", "as", "by", "in",
                                          "on", "or", "for", "its", "was", "so", "it", "we", "an", "has", "if",
                                          "with", "via", "cm", "mm", "is", "its", "from", "not", "but"};
  return w;
}

const std::set<std::string>& point_connectors() {
  static const std::set<std::string> w = {"is", "at", "are", "located", "lies", "sits", "approximately", "approx",
                                          "about", "around", "roughly", "has", "coordinates", "coordinate", "of",
                                          "position", "would", "be", "should"};
  return w;
}

}  // namespace

std::map<std::string, Vec3> parse_points(std::string_view text) {
  std::map<std::string, Vec3> out;
  const Scanner sc(text);
  const std::size_t n = sc.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_alpha(text[i]) || !sc.word_start(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_alpha(text[j])) ++j;
    const std::size_t len = j - i;
    if (len > 3 || is_digit(sc.at(j))) {
      i = j;
      continue;
    }
    std::string word;
    for (std::size_t q = i; q < j; ++q) word.push_back(lower(text[q]));
    if (point_label_stopwords().count(word)) {
      i = j;
      continue;
    }

    std::size_t k = sc.skip_stars_ws(j);
    for (int c = 0; c < 5; ++c) {
      if (sc.at(k) == ':' || sc.at(k) == '=') {
        k = sc.skip_stars_ws(k + 1);
        continue;
      }
      if (is_alpha(sc.at(k))) {
        const std::string w = sc.word_at(k);
        if (!w.empty() && point_connectors().count(w)) {
          k = sc.skip_stars_ws(k + w.size());
          continue;
        }
      }
      break;
    }
    double v[3];
    if (sc.tuple(k, 3, v)) {
      std::string label;
      for (char ch : word) label.push_back(upper(ch));
      out[label] = Vec3(v[0], v[1], v[2]);
      i = k;
    } else {
      i = j;
    }
  }
  return out;
}

namespace {

const std::set<std::string>& range_fillers() {
  static const std::set<std::string> w = {
      "axis",  "axes",    "range",      "ranges",   "coordinate", "coordinates", "coord",  "coords",
      "value", "values",  "extent",     "extends",  "spans",      "span",        "goes",   "runs",
      "is",    "are",     "will",       "be",       "roughly",    "approximately", "approx", "about",
      "around", "direction", "dimension", "interval", "lies",     "covers",      "occupies", "bounds",
      "limits", "should", "would",      "stretches", "extending", "ranging",     "spanning", "it"};
  return w;
}

bool range_separator(const Scanner& sc, std::size_t& k) {
  if (sc.starts_with(k, kEnDash)) {
    k += kEnDash.size();
    return true;
  }
  if (sc.starts_with(k, kEmDash)) {
    k += kEmDash.size();
    return true;
  }
  if (sc.starts_with(k, "..")) {
    k += 2;
    return true;
  }
  const char c = sc.at(k);
  if (c == '-' || c == ',' || c == '~') {
    ++k;
    return true;
  }
  if (is_alpha(c)) {
    const std::string w = sc.word_at(k);
    if (w == "to" || w == "and" || w == "through" || w == "till" || w == "until") {
      k += w.size();
      return true;
    }
  }
  return false;
}

bool range_expr(const Scanner& sc, std::size_t& i, AxisRange& out) {
  std::size_t k = sc.skip_ws(i);
  char close = '\0';
  if (sc.at(k) == '[' || sc.at(k) == '(') {
    close = sc.at(k) == '[' ? ']' : ')';
    k = sc.skip_ws(k + 1);
  }
  if (is_alpha(sc.at(k))) {
    const std::string w = sc.word_at(k);
    if (w == "from" || w == "between") k = sc.skip_ws(k + w.size());
  }
  double a = 0.0;
  double b = 0.0;
  if (!sc.number(k, a)) return false;
  k = sc.skip_unit(k);
  k = sc.skip_ws(k);
  if (!range_separator(sc, k)) return false;
  k = sc.skip_ws(k);
  if (!sc.number(k, b)) return false;
  k = sc.skip_unit(k);
  if (close != '\0') {
    const std::size_t c = sc.skip_ws(k);
    if (sc.at(c) == close) k = c + 1;
  }
  out = {std::min(a, b), std::max(a, b)};
  i = k;
  return true;
}

}  // namespace

std::map<Axis, AxisRange> parse_ranges(std::string_view text) {
  std::map<Axis, AxisRange> out;
  const Scanner sc(text);
  const std::size_t n = sc.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = lower(text[i]);
    if (!(c == 'x' || c == 'y' || c == 'z') || !sc.word_start(i) || is_alnum(sc.at(i + 1))) {
      ++i;
      continue;
    }
    const Axis axis = c == 'x' ? Axis::X : (c == 'y' ? Axis::Y : Axis::Z);
    std::size_t k = i + 1;
    for (int f = 0; f < 6; ++f) {
      std::size_t q = sc.skip_stars_ws(k);
      if (sc.at(q) == ':' || sc.at(q) == '=') {
        k = q + 1;
        continue;
      }
      if (sc.at(q) == '-' && is_alpha(sc.at(q + 1))) ++q;
      if (is_alpha(sc.at(q))) {
        const std::string w = sc.word_at(q);
        if (!w.empty() && range_fillers().count(w)) {
          k = q + w.size();
          continue;
        }
      }
      break;
    }
    k = sc.skip_stars_ws(k);
    if (sc.at(k) == ':' || sc.at(k) == '=') k = sc.skip_ws(k + 1);
    AxisRange r;
    if (range_expr(sc, k, r)) {
      out[axis] = r;
      i = k;
    } else {
      ++i;
    }
  }
  return out;
}

namespace {

struct Mention {
  std::size_t pos;
  std::size_t candidate;
  int sentence;
  int clause;
  bool negated;
};

const std::set<std::string>& negators() {
  static const std::set<std::string> w = {"not", "isn", "isnt", "aren", "arent", "no", "than", "instead",
                                          "except", "excluding", "unlike", "cannot", "never", "nor", "neither"};
  return w;
}

}  // namespace

std::optional<std::string> parse_choice(std::string_view text, const std::vector<std::string>& candidates) {
  if (candidates.empty()) return std::nullopt;
  std::string low(text.size(), '\0');
  std::transform(text.begin(), text.end(), low.begin(), lower);
  const std::size_t n = low.size();

  // Sentence and clause index of every byte.
  std::vector<int> sentence(n + 1, 0);
  std::vector<int> clause(n + 1, 0);
  int s_id = 0;
  int c_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sentence[i] = s_id;
    clause[i] = c_id;
    const char ch = low[i];
    const bool end_mark = (ch == '.' || ch == '!' || ch == '?') &&
                          (i + 1 == n || low[i + 1] == ' ' || low[i + 1] == '\n' || low[i + 1] == '\t' || low[i + 1] == '\r');
    if (end_mark || ch == '\n') {
      ++s_id;
      ++c_id;
    } else if (ch == ',' || ch == ';' || ch == ':' || ch == '(' || ch == ')') {
      ++c_id;
    } else if (ch == ' ' && low.compare(i, 5, " but ") == 0) {
      ++c_id;
    }
  }

  auto previous_words = [&](std::size_t pos, int max_words) {
    std::vector<std::string> words;
    std::size_t i = pos;
    while (i > 0 && static_cast<int>(words.size()) < max_words) {
      --i;
      if (clause[i] != clause[pos]) break;
      if (!is_alpha(low[i])) continue;
      std::size_t end = i + 1;
      while (i > 0 && is_alpha(low[i - 1])) --i;
      words.emplace_back(low.substr(i, end - i));
    }
    return words;
  };

  std::vector<Mention> mentions;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::string needle(candidates[c].size(), '\0');
    std::transform(candidates[c].begin(), candidates[c].end(), needle.begin(), lower);
    if (needle.empty()) continue;
    for (std::size_t pos = low.find(needle); pos != std::string::npos; pos = low.find(needle, pos + 1)) {
      const std::size_t end = pos + needle.size();
      if (pos > 0 && is_alnum(low[pos - 1])) continue;
      if (end < n && is_alnum(low[end])) continue;
      bool negated = false;
      for (const auto& w : previous_words(pos, 2)) negated = negated || negators().count(w) > 0;
      mentions.push_back({pos, c, sentence[pos], clause[pos], negated});
    }
  }
  std::erase_if(mentions, [](const Mention& m) { return m.negated; });
  if (mentions.empty()) return std::nullopt;

  std::set<std::size_t> distinct;
  for (const auto& m : mentions) distinct.insert(m.candidate);
  if (distinct.size() == 1) return candidates[*distinct.begin()];

  int last_sentence = -1;
  for (const auto& m : mentions) last_sentence = std::max(last_sentence, m.sentence);
  int last_clause = -1;
  for (const auto& m : mentions) {
    if (m.sentence == last_sentence) last_clause = std::max(last_clause, m.clause);
  }
  distinct.clear();
  for (const auto& m : mentions) {
    if (m.clause == last_clause) distinct.insert(m.candidate);
  }
  if (distinct.size() == 1) return candidates[*distinct.begin()];
  return std::nullopt;
}

std::map<int, Pixel> parse_view_pixels(std::string_view text) {
  std::map<int, Pixel> out;
  const Scanner sc(text);
  const std::size_t n = sc.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_alpha(text[i]) || !sc.word_start(i)) {
      ++i;
      continue;
    }
    const std::string w = sc.word_at(i);
    if (w != "view" && w != "image") {
      while (i < n && is_alpha(text[i])) ++i;
      continue;
    }
    std::size_t k = sc.skip_ws(i + w.size());
    int index = 0;
    int digits = 0;
    while (is_digit(sc.at(k)) && digits < 6) {
      index = index * 10 + (sc.at(k++) - '0');
      ++digits;
    }
    if (digits == 0 || is_digit(sc.at(k)) || index < 1) {
      i += w.size();
      continue;
    }
    k = sc.skip_stars_ws(k);
    for (int c = 0; c < 3; ++c) {
      if (sc.at(k) == ':' || sc.at(k) == '=') {
        k = sc.skip_stars_ws(k + 1);
        continue;
      }
      const std::string cw = sc.word_at(k);
      if (cw == "at" || cw == "is") {
        k = sc.skip_stars_ws(k + cw.size());
        continue;
      }
      break;
    }
    double v[2];
    if (sc.tuple(k, 2, v)) {
      out[index - 1] = Pixel{v[0], v[1]};
      i = k;
    } else {
      i += w.size();
    }
  }
  return out;
}

}  // namespace axp
