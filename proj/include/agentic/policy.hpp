#pragma once

// Toy proposer policy for the synthetic environment: a linear softmax over
// the five action kinds on hand-built observation features. Action content
// is a deterministic function of the observation, so each step's first
// token carries the decision log-probability and the remaining tokens have
// log-probability 0.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentic/environment.hpp"
#include "agentic/errors.hpp"
#include "agentic/mgpo.hpp"
#include "agentic/rng.hpp"

namespace agentic {

using LegalMask = std::array<bool, kNumActionKinds>;

struct Decision {
  std::vector<double> features;
  LegalMask legal{};
  std::size_t choice = 0;
};

inline constexpr std::size_t kNumFeatures = 13;

namespace detail {

inline bool reflection_mentions(const Observation& obs, std::string_view token) {
  for (const auto& e : obs.history) {
    if (e.kind != HistoryEntry::Kind::Action || !e.text.starts_with("<think>")) continue;
    for (const auto& t : whitespace_tokens(e.text))
      if (t == token) return true;
  }
  return false;
}

/// Next thing a reflection can coherently reference: the latest tool output,
/// then active skills in order.
inline std::optional<std::string> reflection_target(const Observation& obs) {
  if (const auto k = tool_output_count(obs); k > 0 && !reflection_mentions(obs, tool_ref(k))) return tool_ref(k);
  for (const auto& s : obs.active_skills)
    if (!reflection_mentions(obs, s)) return s;
  return std::nullopt;
}

inline bool pruned_since_last_check(const Observation& obs) {
  for (auto it = obs.history.rbegin(); it != obs.history.rend(); ++it) {
    if (it->kind == HistoryEntry::Kind::ToolOutput) return false;
    if (it->text.starts_with("<edit>")) return true;
  }
  return false;
}

inline bool last_action_is(const Observation& obs, std::string_view keyword) {
  for (auto it = obs.history.rbegin(); it != obs.history.rend(); ++it)
    if (it->kind == HistoryEntry::Kind::Action) return it->text.starts_with(keyword);
  return false;
}

}  // namespace detail

inline std::vector<double> decision_features(const Observation& obs, std::size_t step, std::size_t horizon) {
  std::vector<double> f(kNumFeatures, 0.0);
  f[0] = 1.0;
  f[1 + static_cast<std::size_t>(obs.stage)] = 1.0;
  const auto last = detail::last_check_passed(obs);
  f[5] = flagged_conflict(obs).has_value() ? 1.0 : 0.0;
  f[6] = last.value_or(false) ? 1.0 : 0.0;
  f[7] = last.has_value() ? 0.0 : 1.0;
  f[8] = detail::pruned_since_last_check(obs) ? 1.0 : 0.0;
  f[9] = detail::last_action_is(obs, "<think>") ? 1.0 : 0.0;
  f[10] = detail::last_action_is(obs, "<exec>") ? 1.0 : 0.0;
  f[11] = detail::reflection_target(obs).has_value() ? 1.0 : 0.0;
  f[12] = horizon == 0 ? 0.0 : static_cast<double>(step) / static_cast<double>(horizon);
  return f;
}

inline LegalMask legal_actions(const Observation& obs) {
  LegalMask m{};
  m.fill(true);
  m[static_cast<std::size_t>(ActionKind::SkillEdit)] = obs.active_skills.size() >= 2;
  return m;
}

/// Concrete action of the given kind for this observation.
inline Action build_action(ActionKind kind, const Observation& obs, const SynthesisEnv& env) {
  switch (kind) {
    case ActionKind::Reflect: {
      const auto target = detail::reflection_target(obs);
      return Action::reflect(target ? "consider " + *target : "revisit the draft");
    }
    case ActionKind::ToolExec:
      return Action::tool_exec(checker_program(env.draft(obs)));
    case ActionKind::SkillEdit: {
      require(obs.active_skills.size() >= 2, ErrorCode::IllegalAction, "pruning needs two active skills");
      const auto flagged = flagged_conflict(obs);
      return Action::skill_edit(flagged ? *flagged : obs.active_skills.back());
    }
    case ActionKind::Respond:
      return Action::respond("noted");
    case ActionKind::Submit:
      return Action::submit(synthetic_render(obs, env.draft(obs)));
  }
  fail(ErrorCode::InvalidArgument, "unknown action kind");
}

class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(std::size_t num_features = kNumFeatures)
      : num_features_(num_features), weights_(num_features * kNumActionKinds, 0.0) {}

  std::size_t num_features() const { return num_features_; }
  std::size_t num_params() const { return weights_.size(); }
  std::vector<double>& params() { return weights_; }
  const std::vector<double>& params() const { return weights_; }

  double& weight(std::size_t feature, std::size_t action) { return weights_[feature * kNumActionKinds + action]; }
  double weight(std::size_t feature, std::size_t action) const {
    return weights_[feature * kNumActionKinds + action];
  }

  /// Log-probabilities over action kinds; illegal kinds get -infinity.
  std::array<double, kNumActionKinds> log_probs(const std::vector<double>& features, const LegalMask& legal) const {
    require(features.size() == num_features_, ErrorCode::InvalidArgument, "feature size mismatch");
    std::array<double, kNumActionKinds> logits{};
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < kNumActionKinds; ++a) {
      if (!legal[a]) {
        logits[a] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double z = 0.0;
      for (std::size_t f = 0; f < num_features_; ++f) z += features[f] * weight(f, a);
      logits[a] = z;
      mx = std::max(mx, z);
    }
    require(std::isfinite(mx), ErrorCode::IllegalAction, "no legal action");
    double total = 0.0;
    for (std::size_t a = 0; a < kNumActionKinds; ++a)
      if (legal[a]) total += std::exp(logits[a] - mx);
    const double lse = mx + std::log(total);
    for (auto& l : logits)
      if (std::isfinite(l)) l -= lse;
    return logits;
  }

  double log_prob(const Decision& d) const {
    require(d.legal[d.choice], ErrorCode::IllegalAction, "decision chose an illegal action");
    return log_probs(d.features, d.legal)[d.choice];
  }

  /// grad += coeff * d log pi(choice) / d params.
  void accumulate_grad(const Decision& d, double coeff, std::vector<double>& grad) const {
    const auto lp = log_probs(d.features, d.legal);
    for (std::size_t a = 0; a < kNumActionKinds; ++a) {
      if (!d.legal[a]) continue;
      const double g = coeff * ((a == d.choice ? 1.0 : 0.0) - std::exp(lp[a]));
      for (std::size_t f = 0; f < num_features_; ++f) grad[f * kNumActionKinds + a] += g * d.features[f];
    }
  }

  std::size_t sample(const std::vector<double>& features, const LegalMask& legal, Rng& rng) const {
    const auto lp = log_probs(features, legal);
    std::vector<double> p(kNumActionKinds);
    for (std::size_t a = 0; a < kNumActionKinds; ++a) p[a] = legal[a] ? std::exp(lp[a]) : 0.0;
    return sample_weighted(rng, p);
  }

  nlohmann::json to_json() const {
    return {{"num_features", num_features_}, {"num_actions", kNumActionKinds}, {"weights", weights_}};
  }

  static SoftmaxPolicy from_json(const nlohmann::json& j) {
    SoftmaxPolicy p(j.at("num_features").get<std::size_t>());
    require(j.at("num_actions").get<std::size_t>() == kNumActionKinds, ErrorCode::ConfigInvalid,
            "policy action count mismatch");
    auto w = j.at("weights").get<std::vector<double>>();
    require(w.size() == p.weights_.size(), ErrorCode::ConfigInvalid, "policy weight count mismatch");
    p.weights_ = std::move(w);
    return p;
  }

 private:
  std::size_t num_features_;
  std::vector<double> weights_;
};

/// Per-step decisions for a batch, [episode][step].
using Decisions = PerStep<Decision>;

/// Token log-probabilities under `policy` for steps with the given token counts.
inline TokenValues token_log_probs(const SoftmaxPolicy& policy, const Decisions& decisions, const Batch& batch) {
  TokenValues out = zeros_like(batch);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) out[i][t][0] = policy.log_prob(decisions[i][t]);
  return out;
}

/// Chains per-token dL/dlog pi into parameter space. Only the decision token
/// depends on the parameters.
inline std::vector<double> param_gradient(const SoftmaxPolicy& policy, const Decisions& decisions,
                                          const TokenValues& token_grad) {
  std::vector<double> grad(policy.num_params(), 0.0);
  for (std::size_t i = 0; i < decisions.size(); ++i)
    for (std::size_t t = 0; t < decisions[i].size(); ++t)
      policy.accumulate_grad(decisions[i][t], token_grad[i][t][0], grad);
  return grad;
}

struct Adam {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;
  std::size_t t = 0;

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    if (m.size() != params.size()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
      params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }

  nlohmann::json to_json() const { return {{"lr", lr}, {"m", m}, {"v", v}, {"t", t}}; }
  static Adam from_json(const nlohmann::json& j) {
    Adam a;
    a.lr = j.at("lr").get<double>();
    a.m = j.at("m").get<std::vector<double>>();
    a.v = j.at("v").get<std::vector<double>>();
    a.t = j.at("t").get<std::size_t>();
    return a;
  }
};

/// One episode under the policy. Decisions are returned alongside the
/// trajectory, one per step.
struct Rollout {
  Trajectory trajectory;
  std::vector<Decision> decisions;
};

inline Rollout run_policy_episode(const SoftmaxPolicy& policy, const SyntheticTask& task,
                                  std::span<const Skill> skills, const EnvConfig& config, std::uint64_t seed) {
  SynthesisEnv env(config);
  Rollout out;
  auto obs = env.reset(task, skills);
  auto rng = make_rng(seed);
  for (;;) {
    Decision d;
    d.features = decision_features(obs, env.steps_taken(), config.horizon);
    d.legal = legal_actions(obs);
    d.choice = policy.sample(d.features, d.legal, rng);
    auto action = build_action(static_cast<ActionKind>(d.choice), obs, env);
    auto result = record_step(env, out.trajectory, obs, std::move(action));
    out.decisions.push_back(std::move(d));
    obs = std::move(result.observation);
    if (result.done) break;
  }
  return out;
}

/// Decisions that reproduce a recorded trajectory's action kinds.
inline std::vector<Decision> decisions_for(const Trajectory& traj, std::size_t horizon) {
  std::vector<Decision> out;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    Decision d;
    d.features = decision_features(step.observation, t, horizon);
    d.legal = legal_actions(step.observation);
    d.choice = static_cast<std::size_t>(step.action.kind);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace agentic
