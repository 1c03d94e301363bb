#pragma once

// Synthesis loop as a POMDP: observations <active skills, history, stage>,
// cognitive/tool/terminal actions, dynamic skill pruning, and a modular
// arithmetic instantiation with a scripted expert.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agentic/errors.hpp"
#include "agentic/problem.hpp"
#include "agentic/rng.hpp"
#include "agentic/skill_library.hpp"
#include "agentic/synthetic.hpp"
#include "agentic/verification.hpp"

namespace agentic {

struct HistoryEntry {
  enum class Kind { Action, ToolOutput };
  Kind kind = Kind::Action;
  std::string text;

  bool operator==(const HistoryEntry&) const = default;
};

struct Observation {
  std::vector<std::string> active_skills;  // insertion order kept
  std::vector<HistoryEntry> history;
  CognitiveStage stage = CognitiveStage::Draft;

  bool is_active(std::string_view name) const {
    return std::find(active_skills.begin(), active_skills.end(), name) != active_skills.end();
  }
  bool operator==(const Observation&) const = default;
};

enum class ActionKind { Reflect, ToolExec, SkillEdit, Respond, Submit };

inline constexpr std::size_t kNumActionKinds = 5;

inline std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Reflect: return "reflect";
    case ActionKind::ToolExec: return "tool_exec";
    case ActionKind::SkillEdit: return "skill_edit";
    case ActionKind::Respond: return "respond";
    case ActionKind::Submit: return "submit";
  }
  return "respond";
}

inline ActionKind parse_action_kind(std::string_view text) {
  for (auto k : {ActionKind::Reflect, ActionKind::ToolExec, ActionKind::SkillEdit, ActionKind::Respond,
                 ActionKind::Submit})
    if (to_string(k) == text) return k;
  fail(ErrorCode::InvalidArgument, "unknown action kind '" + std::string(text) + "'");
}

namespace detail {

inline std::string_view action_keyword(ActionKind kind) {
  switch (kind) {
    case ActionKind::Reflect: return "<think>";
    case ActionKind::ToolExec: return "<exec>";
    case ActionKind::SkillEdit: return "<edit>";
    case ActionKind::Respond: return "<respond>";
    case ActionKind::Submit: return "<submit>";
  }
  return "<respond>";
}

inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

/// An action with its whitespace-token serialization. For SkillEdit, `text`
/// is the skill to remove; for Submit, `problem` carries the statement.
struct Action {
  ActionKind kind = ActionKind::Respond;
  std::string text;
  std::optional<ProblemStatement> problem;
  std::vector<std::string> tokens;

  std::string serialized() const {
    std::string out(detail::action_keyword(kind));
    if (kind == ActionKind::SkillEdit) out += " remove";
    const auto& body = kind == ActionKind::Submit && problem ? problem->text : text;
    if (!body.empty()) out += " " + body;
    return out;
  }

  static Action make(ActionKind kind, std::string text, std::optional<ProblemStatement> problem = std::nullopt) {
    Action a{kind, std::move(text), std::move(problem), {}};
    a.tokens = detail::whitespace_tokens(a.serialized());
    return a;
  }
  static Action reflect(std::string text) { return make(ActionKind::Reflect, std::move(text)); }
  static Action tool_exec(std::string program) { return make(ActionKind::ToolExec, std::move(program)); }
  static Action skill_edit(std::string skill) { return make(ActionKind::SkillEdit, std::move(skill)); }
  static Action respond(std::string text) { return make(ActionKind::Respond, std::move(text)); }
  static Action submit(ProblemStatement problem) { return make(ActionKind::Submit, {}, std::move(problem)); }

  bool operator==(const Action&) const = default;
};

struct Step {
  Observation observation;
  Action action;
  double process_reward = 0.0;
};

struct Terminal {
  ProblemStatement problem;
  VerifierVerdict verdict;
  ProbeResult probe;
  double terminal_reward = 0.0;
};

struct Trajectory {
  std::string episode_id;
  std::string category;
  std::vector<Step> steps;
  /// Set by the final Submit; absent for truncated episodes.
  std::optional<ProblemStatement> submission;
  /// Set after verification and probing.
  std::optional<Terminal> terminal;

  bool truncated() const { return !submission.has_value(); }
  double process_total() const {
    double sum = 0.0;
    for (const auto& s : steps) sum += s.process_reward;
    return sum;
  }
};

struct SyntheticTask {
  std::vector<std::int64_t> modulus_pool{3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::size_t target_skill_count = 3;
  std::uint64_t rng_seed = 0;
  /// Explicit constraints for named skills, bypassing the derived template.
  std::map<std::string, Constraint> pinned;

  void validate() const {
    require(!modulus_pool.empty(), ErrorCode::InvalidArgument, "modulus pool is empty");
    for (auto m : modulus_pool) require(m >= 2, ErrorCode::InvalidArgument, "moduli must be >= 2");
    require(target_skill_count >= 1, ErrorCode::InvalidArgument, "target skill count must be >= 1");
  }
};

struct EnvConfig {
  double r_exec = 0.1;
  double r_think = 0.05;
  std::size_t horizon = 32;
  /// Kept for completeness of the POMDP tuple; episodes are undiscounted.
  double discount = 0.99;
};

/// Constraint template a skill contributes: modulus from difficulty (larger
/// difficulty, larger modulus), residue drawn from the task seed and name.
inline Constraint synthetic_constraint(const Skill& skill, const SyntheticTask& task) {
  if (auto it = task.pinned.find(skill.name); it != task.pinned.end()) return it->second;
  auto pool = task.modulus_pool;
  std::sort(pool.begin(), pool.end());
  const double t = (skill.difficulty_effect - kMinDifficulty) / (kMaxDifficulty - kMinDifficulty);
  const auto idx = static_cast<std::size_t>(std::lround(t * static_cast<double>(pool.size() - 1)));
  const auto modulus = pool[std::min(idx, pool.size() - 1)];
  auto rng = make_rng(derive_seed(task.rng_seed, hash_text(skill.name)));
  return make_constraint(static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(modulus))),
                         modulus);
}

/// Statement for a drafted constraint list.
inline ProblemStatement synthetic_render(const Observation& obs, const ConstraintSystem& draft) {
  require(!draft.empty(), ErrorCode::EmptyDraft, "cannot render an empty draft");
  return ProblemStatement{render_system(draft), obs.active_skills, draft};
}

struct StepResult {
  Observation observation;
  double process_reward = 0.0;
  bool done = false;
  bool truncated = false;
};

namespace detail {

inline std::optional<bool> last_check_passed(const Observation& obs) {
  for (auto it = obs.history.rbegin(); it != obs.history.rend(); ++it)
    if (it->kind == HistoryEntry::Kind::ToolOutput) return it->text.find(" PASS") != std::string::npos;
  return std::nullopt;
}

inline std::size_t tool_output_count(const Observation& obs) {
  return static_cast<std::size_t>(std::count_if(obs.history.begin(), obs.history.end(), [](const HistoryEntry& e) {
    return e.kind == HistoryEntry::Kind::ToolOutput;
  }));
}

}  // namespace detail

/// Deterministic stage policy for the synthetic environment: tool execution
/// enters Check; leaving Check goes to Refine after a failed check and to
/// Finalize after a passing one; other stages persist.
inline CognitiveStage next_stage(CognitiveStage current, ActionKind kind, std::optional<bool> last_check) {
  if (kind == ActionKind::ToolExec) return CognitiveStage::Check;
  if (kind == ActionKind::Submit) return current;
  if (current == CognitiveStage::Check)
    return last_check.value_or(false) ? CognitiveStage::Finalize : CognitiveStage::Refine;
  return current;
}

/// Tool output reference token for the k-th (1-based) execution.
inline std::string tool_ref(std::size_t k) { return "tool#" + std::to_string(k); }

/// Name of the skill flagged by the most recent failing check, if it is
/// still active.
inline std::optional<std::string> flagged_conflict(const Observation& obs) {
  for (auto it = obs.history.rbegin(); it != obs.history.rend(); ++it) {
    if (it->kind != HistoryEntry::Kind::ToolOutput) continue;
    constexpr std::string_view kKey = "conflict=";
    const auto pos = it->text.find(kKey);
    if (pos == std::string::npos) return std::nullopt;
    auto name = it->text.substr(pos + kKey.size());
    if (obs.is_active(name)) return name;
    return std::nullopt;
  }
  return std::nullopt;
}

/// One episode's environment. Instances share nothing and may run in parallel.
class SynthesisEnv {
 public:
  explicit SynthesisEnv(EnvConfig config = {}) : config_(config) {}

  const EnvConfig& config() const { return config_; }

  Observation reset(const SyntheticTask& task, std::span<const Skill> sampled_skills) {
    require(!sampled_skills.empty(), ErrorCode::EmptySkillSet, "reset needs at least one skill");
    task.validate();
    constraints_.clear();
    steps_ = 0;
    done_ = false;
    Observation obs;
    for (const auto& skill : sampled_skills) {
      require(!obs.is_active(skill.name), ErrorCode::InvalidArgument, "duplicate skill '" + skill.name + "'");
      obs.active_skills.push_back(skill.name);
      constraints_.emplace(skill.name, synthetic_constraint(skill, task));
    }
    return obs;
  }

  const Constraint& constraint_of(const std::string& skill) const {
    const auto it = constraints_.find(skill);
    require(it != constraints_.end(), ErrorCode::InvalidArgument, "skill not in episode: " + skill);
    return it->second;
  }

  /// Constraints induced by the active skills, in order.
  ConstraintSystem draft(const Observation& obs) const {
    ConstraintSystem system;
    for (const auto& name : obs.active_skills) system.push_back(constraint_of(name));
    return system;
  }

  /// Reflection coherence: the text names an active skill or a prior tool output.
  static bool coherent_reflection(const Observation& obs, std::string_view text) {
    const auto outputs = detail::tool_output_count(obs);
    for (const auto& tok : detail::whitespace_tokens(text)) {
      std::string_view t = tok;
      while (!t.empty() && (t.back() == ':' || t.back() == ',' || t.back() == '.')) t.remove_suffix(1);
      if (obs.is_active(t)) return true;
      for (std::size_t k = 1; k <= outputs; ++k)
        if (t == tool_ref(k)) return true;
    }
    return false;
  }

  StepResult step(const Observation& obs, const Action& action) {
    require(!done_, ErrorCode::IllegalAction, "episode already finished");
    require(!action.tokens.empty(), ErrorCode::InvalidArgument, "action has no tokens");
    StepResult out;
    out.observation = obs;
    auto& next = out.observation;
    next.history.push_back({HistoryEntry::Kind::Action, action.serialized()});

    switch (action.kind) {
      case ActionKind::Reflect:
        if (coherent_reflection(obs, action.text)) out.process_reward = config_.r_think;
        break;
      case ActionKind::ToolExec: {
        const auto k = detail::tool_output_count(obs) + 1;
        std::string output = "[" + tool_ref(k) + "]";
        if (const auto program = parse_checker_program(action.text); !program) {
          output += " ERROR malformed program";
        } else if (const auto bad = first_conflict(*program); bad) {
          output += " FAIL conflict=" + clause_owner(obs, *program, *bad);
        } else {
          output += " PASS";
          out.process_reward = config_.r_exec;
        }
        next.history.push_back({HistoryEntry::Kind::ToolOutput, std::move(output)});
        break;
      }
      case ActionKind::SkillEdit: {
        require(obs.is_active(action.text), ErrorCode::IllegalAction,
                "cannot prune '" + action.text + "': not an active skill");
        require(obs.active_skills.size() > 1, ErrorCode::IllegalAction, "cannot prune the last active skill");
        std::erase(next.active_skills, action.text);
        break;
      }
      case ActionKind::Respond:
        break;
      case ActionKind::Submit:
        require(action.problem.has_value(), ErrorCode::IllegalAction, "submit without a problem");
        out.done = true;
        break;
    }
    next.stage = next_stage(obs.stage, action.kind, detail::last_check_passed(next));
    ++steps_;
    if (!out.done && steps_ >= config_.horizon) {
      out.done = true;
      out.truncated = true;
    }
    done_ = out.done;
    return out;
  }

  std::size_t steps_taken() const { return steps_; }
  bool done() const { return done_; }

 private:
  std::string clause_owner(const Observation& obs, const ConstraintSystem& program, std::size_t index) const {
    if (index < obs.active_skills.size() && constraints_.at(obs.active_skills[index]) == program[index])
      return obs.active_skills[index];
    for (const auto& name : obs.active_skills)
      if (constraints_.at(name) == program[index]) return name;
    return "clause-" + std::to_string(index + 1);
  }

  EnvConfig config_;
  std::map<std::string, Constraint> constraints_;
  std::size_t steps_ = 0;
  bool done_ = false;
};

/// Runs one episode step and records it on the trajectory.
inline StepResult record_step(SynthesisEnv& env, Trajectory& traj, const Observation& obs, Action action) {
  auto result = env.step(obs, action);
  if (action.kind == ActionKind::Submit) traj.submission = action.problem;
  traj.steps.push_back({obs, std::move(action), result.process_reward});
  return result;
}

/// Demonstration policy: reflect, check, and on failure reflect, prune the
/// flagged skill and re-check; submit once the check passes.
inline Trajectory scripted_expert(const SyntheticTask& task, std::span<const Skill> skills, EnvConfig config = {}) {
  SynthesisEnv env(config);
  Trajectory traj;
  auto obs = env.reset(task, skills);

  auto advance = [&](Action action) {
    auto r = record_step(env, traj, obs, std::move(action));
    obs = std::move(r.observation);
    if (r.truncated) fail(ErrorCode::ExpertFailure, "expert exceeded the step horizon");
  };

  advance(Action::reflect("review skill " + obs.active_skills.front() + " before drafting"));
  for (;;) {
    advance(Action::tool_exec(checker_program(env.draft(obs))));
    const auto k = detail::tool_output_count(obs);
    if (const auto conflict = flagged_conflict(obs)) {
      advance(Action::reflect(tool_ref(k) + " reports " + *conflict + " contradicts the draft"));
      advance(Action::skill_edit(*conflict));
      continue;
    }
    if (!detail::last_check_passed(obs).value_or(false))
      fail(ErrorCode::ExpertFailure, "checker failed without naming a prunable skill");
    advance(Action::reflect(tool_ref(k) + " confirms the draft is consistent"));
    break;
  }
  const auto draft = env.draft(obs);
  if (!solvable(draft)) fail(ErrorCode::ExpertFailure, "no valid problem for this skill set");
  advance(Action::submit(synthetic_render(obs, draft)));
  return traj;
}

/// Plain-text generation trace handed to verifiers.
inline std::string generation_trace(const Trajectory& traj) {
  std::string out;
  for (const auto& step : traj.steps) {
    out += "[" + std::string(to_string(step.observation.stage)) + "] " + step.action.serialized() + "\n";
  }
  return out;
}

}  // namespace agentic
