#pragma once

// Skill packages: parsing, validation, quality filtering and composition.
//
// A package is a directory holding SKILL.md (a `---`-delimited metadata
// block of scalar `key: value` lines followed by a markdown body) and an
// optional scripts/ directory whose files are kept as opaque text.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentic/errors.hpp"
#include "agentic/rng.hpp"

namespace agentic {

inline constexpr double kMinDifficulty = 1.0;
inline constexpr double kMaxDifficulty = 10.0;
inline constexpr double kDefaultQualityThreshold = 0.5;
/// Score assumed for packages that carry no quality field and no sidecar entry.
inline constexpr double kUnscoredQuality = 1.0;

/// Level 1 extras, Level 2 construction logic, Level 3 scripts.
struct SkillBody {
  std::vector<std::pair<std::string, std::string>> extra_metadata;
  std::string construction_logic;
  std::map<std::string, std::string> scripts;

  bool operator==(const SkillBody&) const = default;
};

struct Skill {
  std::string name;
  std::string category;
  std::string intent;
  std::string method;
  double difficulty_effect = kMinDifficulty;
  std::string tool_hint;
  double quality_score = kUnscoredQuality;
  SkillBody body;

  bool operator==(const Skill&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline bool is_delimiter(std::string_view line) {
  line = strip_cr(line);
  while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
  return line == "---";
}

inline bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '-';
}

// Returns the key length when `line` starts with `key:` followed by space/EOL.
inline std::size_t key_prefix(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && is_key_char(line[i])) ++i;
  if (i == 0 || i >= line.size() || line[i] != ':') return 0;
  if (i + 1 < line.size() && line[i + 1] != ' ' && line[i + 1] != '\t') return 0;
  return i;
}

inline std::string unquote(std::string_view raw) {
  if (raw.empty()) return {};
  const char q = raw.front();
  if (q != '"' && q != '\'') {
    if (q == '[' || q == '{')
      fail(ErrorCode::MalformedFrontmatter, "nested value not supported: " + std::string(raw));
    if (q == '|' || q == '>')
      fail(ErrorCode::MalformedFrontmatter, "block scalars not supported");
    return std::string(raw);
  }
  if (raw.size() < 2 || raw.back() != q)
    fail(ErrorCode::MalformedFrontmatter, "unterminated quoted value: " + std::string(raw));
  std::string out;
  const auto inner = raw.substr(1, raw.size() - 2);
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const char c = inner[i];
    if (q == '"' && c == '\\' && i + 1 < inner.size()) {
      const char e = inner[++i];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default:
          fail(ErrorCode::MalformedFrontmatter, std::string("unknown escape \\") + e);
      }
    } else if (q == '\'' && c == '\'' && i + 1 < inner.size() && inner[i + 1] == '\'') {
      out.push_back('\'');
      ++i;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline bool needs_quotes(std::string_view v) {
  if (v.empty()) return false;
  if (v != trim(v)) return true;
  const char c = v.front();
  if (c == '"' || c == '\'' || c == '[' || c == '{' || c == '|' || c == '>') return true;
  return v.find_first_of("\n\t\r") != std::string_view::npos;
}

inline std::string quote(std::string_view v) {
  if (!needs_quotes(v)) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

// Text of the first markdown section whose heading mentions "Action",
// up to the next heading of the same or higher level.
inline std::string action_section(std::string_view body) {
  const auto lines = split_lines(body);
  std::size_t level = 0;
  std::string out;
  bool inside = false;
  for (auto raw : lines) {
    const auto line = strip_cr(raw);
    std::size_t hashes = 0;
    while (hashes < line.size() && line[hashes] == '#') ++hashes;
    const bool heading = hashes > 0 && hashes < line.size() && line[hashes] == ' ';
    if (inside) {
      if (heading && hashes <= level) break;
      out.append(line);
      out.push_back('\n');
    } else if (heading && line.find("Action") != std::string_view::npos) {
      inside = true;
      level = hashes;
    }
  }
  return std::string(trim(out));
}

inline bool valid_skill_name(std::string_view name) {
  if (name.empty() || name.front() == '-' || name.back() == '-') return false;
  char prev = 0;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
    if (!ok || (c == '-' && prev == '-')) return false;
    prev = c;
  }
  return true;
}

}  // namespace detail

struct Frontmatter {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string body;
};

/// Splits a package document into scalar metadata entries and the body.
/// Unindented lines that are not `key:` lines continue the previous value.
inline Frontmatter split_frontmatter(std::string_view text) {
  using namespace detail;
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i >= lines.size() || !is_delimiter(lines[i]))
    fail(ErrorCode::MalformedFrontmatter, "document must start with a '---' line");
  const std::size_t open = i++;
  std::size_t close = lines.size();
  for (std::size_t j = i; j < lines.size(); ++j) {
    if (is_delimiter(lines[j])) {
      close = j;
      break;
    }
  }
  if (close == lines.size())
    fail(ErrorCode::MalformedFrontmatter, "missing closing '---' line");

  Frontmatter fm;
  std::set<std::string> seen;
  bool last_empty_value = false;
  for (std::size_t j = open + 1; j < close; ++j) {
    const auto line = strip_cr(lines[j]);
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const bool indented = line.front() == ' ' || line.front() == '\t';
    if (indented && (content.starts_with("- ") || content == "-" || key_prefix(content) > 0))
      fail(ErrorCode::MalformedFrontmatter, "nested structures are not supported: " +
                                                std::string(content));
    if (const auto k = indented ? 0 : key_prefix(line); k > 0) {
      std::string key(line.substr(0, k));
      if (!seen.insert(key).second)
        fail(ErrorCode::MalformedFrontmatter, "duplicate key '" + key + "'");
      const auto raw = trim(line.substr(k + 1));
      fm.entries.emplace_back(std::move(key), unquote(raw));
      last_empty_value = raw.empty();
      continue;
    }
    if (fm.entries.empty())
      fail(ErrorCode::MalformedFrontmatter, "unparseable metadata line: " + std::string(content));
    if (indented && last_empty_value)
      fail(ErrorCode::MalformedFrontmatter, "nested structures are not supported");
    auto& value = fm.entries.back().second;
    if (!value.empty()) value.push_back(' ');
    value.append(content);
  }

  std::string body;
  for (std::size_t j = close + 1; j < lines.size(); ++j) {
    body.append(lines[j]);
    if (j + 1 < lines.size()) body.push_back('\n');
  }
  fm.body = std::move(body);
  return fm;
}

/// Parses a SKILL.md document. Accepts `description` for intent,
/// `difficulty` for difficulty_effect, `tool` for tool_hint and `quality`
/// for quality_score; when `method` is absent it is read from the body's
/// "Action" section.
inline Skill parse_skill_package(std::string_view text) {
  auto fm = split_frontmatter(text);
  std::vector<bool> used(fm.entries.size(), false);
  auto take = [&](std::initializer_list<std::string_view> keys) -> std::optional<std::string> {
    for (auto key : keys) {
      for (std::size_t i = 0; i < fm.entries.size(); ++i) {
        if (!used[i] && fm.entries[i].first == key) {
          used[i] = true;
          return fm.entries[i].second;
        }
      }
    }
    return std::nullopt;
  };
  auto required = [&](std::initializer_list<std::string_view> keys) {
    auto v = take(keys);
    if (!v) fail(ErrorCode::MissingField, "missing metadata key '" + std::string(*keys.begin()) + "'");
    return *v;
  };

  Skill skill;
  skill.name = required({"name"});
  if (!detail::valid_skill_name(skill.name))
    fail(ErrorCode::MalformedFrontmatter, "name must be lowercase-hyphenated: " + skill.name);
  skill.category = required({"category"});
  if (skill.category.empty()) fail(ErrorCode::MissingField, "empty 'category'");
  skill.intent = required({"intent", "description"});

  const auto difficulty = required({"difficulty_effect", "difficulty"});
  const auto d = detail::parse_double(difficulty);
  if (!d) fail(ErrorCode::MalformedFrontmatter, "difficulty is not a number: " + difficulty);
  if (!std::isfinite(*d) || *d < kMinDifficulty || *d > kMaxDifficulty)
    fail(ErrorCode::DifficultyOutOfRange, "difficulty " + difficulty + " outside [1,10]");
  skill.difficulty_effect = *d;

  skill.tool_hint = take({"tool_hint", "tool"}).value_or("");
  if (auto q = take({"quality_score", "quality"})) {
    const auto score = detail::parse_double(*q);
    if (!score || !std::isfinite(*score))
      fail(ErrorCode::MalformedFrontmatter, "quality_score is not a number: " + *q);
    skill.quality_score = *score;
  }

  if (auto m = take({"method"})) {
    skill.method = *m;
  } else {
    skill.method = detail::action_section(fm.body);
    if (skill.method.empty())
      fail(ErrorCode::MissingField, "missing metadata key 'method' and no Action section in body");
  }

  for (std::size_t i = 0; i < fm.entries.size(); ++i)
    if (!used[i]) skill.body.extra_metadata.push_back(fm.entries[i]);
  skill.body.construction_logic = std::move(fm.body);
  return skill;
}

/// Canonical SKILL.md text; parse_skill_package(serialize_skill_package(s))
/// reproduces s apart from scripts, which live beside the document.
inline std::string serialize_skill_package(const Skill& skill) {
  using detail::quote;
  std::string out = "---\n";
  auto line = [&](std::string_view key, std::string_view value) {
    out.append(key);
    out.append(": ");
    out.append(quote(value));
    out.push_back('\n');
  };
  line("name", skill.name);
  line("category", skill.category);
  line("intent", skill.intent);
  line("method", skill.method);
  line("difficulty_effect", detail::format_double(skill.difficulty_effect));
  if (!skill.tool_hint.empty()) line("tool_hint", skill.tool_hint);
  line("quality_score", detail::format_double(skill.quality_score));
  for (const auto& [k, v] : skill.body.extra_metadata) line(k, v);
  out.append("---\n");
  out.append(skill.body.construction_logic);
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads one package directory (SKILL.md plus scripts/).
inline Skill load_skill_package(const std::filesystem::path& dir) {
  Skill skill = parse_skill_package(read_text_file(dir / "SKILL.md"));
  const auto scripts = dir / "scripts";
  if (std::filesystem::is_directory(scripts)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(scripts)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = std::filesystem::relative(entry.path(), dir).generic_string();
      skill.body.scripts.emplace(rel, read_text_file(entry.path()));
    }
  }
  return skill;
}

class SkillLibrary {
 public:
  SkillLibrary() = default;
  SkillLibrary(std::set<std::string> categories, double threshold = kDefaultQualityThreshold)
      : categories_(std::move(categories)), threshold_(threshold) {}

  void add(Skill skill) {
    require(categories_.contains(skill.category), ErrorCode::UnknownCategory,
            "skill '" + skill.name + "' has category '" + skill.category + "' outside the configured set");
    require(skill.difficulty_effect >= kMinDifficulty && skill.difficulty_effect <= kMaxDifficulty,
            ErrorCode::DifficultyOutOfRange, "skill '" + skill.name + "'");
    const auto name = skill.name;
    require(skills_.emplace(name, std::move(skill)).second, ErrorCode::DuplicateSkill,
            "duplicate skill name '" + name + "'");
  }

  const Skill& at(const std::string& name) const {
    const auto it = skills_.find(name);
    require(it != skills_.end(), ErrorCode::InvalidArgument, "unknown skill '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return skills_.contains(name); }
  std::size_t size() const { return skills_.size(); }
  bool empty() const { return skills_.empty(); }
  const std::map<std::string, Skill>& skills() const { return skills_; }
  const std::set<std::string>& categories() const { return categories_; }
  double threshold() const { return threshold_; }

  std::vector<std::string> names_in(const std::string& category) const {
    std::vector<std::string> out;
    for (const auto& [name, s] : skills_)
      if (s.category == category) out.push_back(name);
    return out;
  }

 private:
  std::set<std::string> categories_;
  double threshold_ = kDefaultQualityThreshold;
  std::map<std::string, Skill> skills_;
};

struct LibraryViolation {
  std::string package;
  std::string message;
};

struct LibraryScan {
  std::vector<Skill> skills;
  std::vector<LibraryViolation> violations;
};

/// Scans every subdirectory containing SKILL.md. Parse failures, duplicate
/// names and out-of-set categories are collected rather than thrown. An
/// optional `scores.json` ({name: score}) at the root overrides package scores.
/// An empty `categories` set accepts whatever categories the packages declare.
inline LibraryScan scan_library(const std::filesystem::path& root,
                                const std::set<std::string>& categories = {}) {
  require(std::filesystem::is_directory(root), ErrorCode::LibraryEmpty,
          "library directory not found: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "SKILL.md"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  std::map<std::string, double> sidecar;
  if (const auto scores = root / "scores.json"; std::filesystem::exists(scores)) {
    try {
      const auto parsed = nlohmann::json::parse(read_text_file(scores));
      for (const auto& [k, v] : parsed.items()) sidecar[k] = v.get<double>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::LibraryEmpty, "unreadable scores.json: " + std::string(e.what()));
    }
  }

  LibraryScan scan;
  std::set<std::string> names;
  for (const auto& dir : dirs) {
    const auto label = dir.filename().string();
    try {
      Skill skill = load_skill_package(dir);
      if (skill.name != label)
        scan.violations.push_back({label, "directory name differs from skill name '" + skill.name + "'"});
      if (!categories.empty() && !categories.contains(skill.category)) {
        scan.violations.push_back({label, "category '" + skill.category + "' not in configured set"});
        continue;
      }
      if (!names.insert(skill.name).second) {
        scan.violations.push_back({label, "duplicate skill name '" + skill.name + "'"});
        continue;
      }
      if (auto it = sidecar.find(skill.name); it != sidecar.end()) skill.quality_score = it->second;
      scan.skills.push_back(std::move(skill));
    } catch (const Error& e) {
      scan.violations.push_back({label, e.what()});
    }
  }
  return scan;
}

/// Builds a library from scanned skills. Categories default to those present.
inline SkillLibrary make_library(const std::vector<Skill>& skills, std::set<std::string> categories,
                                 double threshold = kDefaultQualityThreshold) {
  if (categories.empty())
    for (const auto& s : skills) categories.insert(s.category);
  SkillLibrary lib(std::move(categories), threshold);
  for (const auto& s : skills) lib.add(s);
  return lib;
}

inline SkillLibrary load_library(const std::filesystem::path& root, const std::set<std::string>& categories = {},
                                 double threshold = kDefaultQualityThreshold) {
  auto scan = scan_library(root, categories);
  if (!scan.violations.empty()) {
    const auto& v = scan.violations.front();
    fail(ErrorCode::LibraryEmpty, std::to_string(scan.violations.size()) + " invalid package(s), first: " +
                                      v.package + ": " + v.message);
  }
  require(!scan.skills.empty(), ErrorCode::LibraryEmpty, "no skill packages under " + root.string());
  return make_library(scan.skills, categories, threshold);
}

struct FilteredDistribution {
  std::vector<std::string> support;
  std::vector<double> probabilities;

  double probability(const std::string& name) const {
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i] == name) return probabilities[i];
    return 0.0;
  }
};

/// Threshold-filtered, teacher-weighted distribution over skills. Missing
/// teacher weights count as 1 (uniform default). When `category` is given the
/// support is further restricted to that category.
inline FilteredDistribution build_filtered_distribution(
    const SkillLibrary& library, const std::map<std::string, double>& teacher_weights = {},
    const std::optional<std::string>& category = std::nullopt) {
  FilteredDistribution dist;
  double total = 0.0;
  for (const auto& [name, skill] : library.skills()) {
    if (category && skill.category != *category) continue;
    if (!(skill.quality_score >= library.threshold())) continue;
    double w = 1.0;
    if (auto it = teacher_weights.find(name); it != teacher_weights.end()) w = it->second;
    require(std::isfinite(w) && w >= 0.0, ErrorCode::InvalidArgument,
            "teacher weight for '" + name + "' must be finite and non-negative");
    dist.support.push_back(name);
    dist.probabilities.push_back(w);
    total += w;
  }
  require(!dist.support.empty() && total > 0.0, ErrorCode::EmptySupport,
          "no skill passes the quality threshold with positive weight");
  for (auto& p : dist.probabilities) p /= total;
  return dist;
}

/// Cross-entropy of the model against the filtered target distribution.
inline double skill_acquisition_loss(const std::map<std::string, double>& model,
                                     const FilteredDistribution& target) {
  double loss = 0.0;
  for (std::size_t i = 0; i < target.support.size(); ++i) {
    const double p = target.probabilities[i];
    if (p == 0.0) continue;
    const auto it = model.find(target.support[i]);
    const double q = it == model.end() ? 0.0 : it->second;
    require(q > 0.0, ErrorCode::ZeroModelProbabilityOnSupport,
            "model assigns no mass to '" + target.support[i] + "'");
    loss -= p * std::log(q);
  }
  return loss;
}

/// Draws up to `count` distinct skills from the distribution.
inline std::vector<std::string> sample_skills(const FilteredDistribution& dist, std::size_t count, Rng& rng) {
  std::vector<double> weights = dist.probabilities;
  std::vector<std::string> out;
  std::size_t positive = std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
  while (out.size() < count && positive > 0) {
    const auto i = sample_weighted(rng, weights);
    out.push_back(dist.support[i]);
    weights[i] = 0.0;
    --positive;
  }
  return out;
}

/// Renders an ordered skill composition as constraint text, one section per
/// skill. Order and duplicates are preserved.
inline std::string compose_constraints(std::span<const Skill> skills) {
  require(!skills.empty(), ErrorCode::EmptyComposition, "composition needs at least one skill");
  std::ostringstream out;
  out << "Compose a single problem that satisfies all " << skills.size() << " constraints below.\n";
  for (std::size_t i = 0; i < skills.size(); ++i) {
    const auto& s = skills[i];
    out << "\n[Constraint " << (i + 1) << "] skill=" << s.name << " category=" << s.category << "\n"
        << "Intent: " << s.intent << "\n"
        << "Method: " << s.method << "\n"
        << "Difficulty effect: " << detail::format_double(s.difficulty_effect) << "/10\n"
        << "Tool hint: " << (s.tool_hint.empty() ? "none" : s.tool_hint) << "\n";
  }
  return out.str();
}

}  // namespace agentic
