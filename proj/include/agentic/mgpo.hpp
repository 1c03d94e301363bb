#pragma once

// Multi-granularity policy optimization.
//
// Advantages are group-standardized at two granularities: terminal rewards
// within each rollout group (trajectory level) and process rewards within
// each cognitive-stage subgroup of the batch (stage level). Their fusion
// A_E + omega * A_S is centered per stage group, as is the implicit reward
// beta * log(pi_theta / pi_ref); the difference of the two centered terms is
// a zero-sum weight per stage group. The weight is attenuated by an
// asymmetric sech^2 gate of the importance ratio and enters a
// token-normalized weighted log-likelihood as a constant coefficient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "agentic/environment.hpp"
#include "agentic/errors.hpp"
#include "agentic/problem.hpp"

namespace agentic {

enum class GateMode { Asymmetric, Symmetric, None };

inline std::string_view to_string(GateMode mode) {
  switch (mode) {
    case GateMode::Asymmetric: return "asymmetric";
    case GateMode::Symmetric: return "symmetric";
    case GateMode::None: return "none";
  }
  return "asymmetric";
}

inline GateMode parse_gate_mode(std::string_view text) {
  for (auto g : {GateMode::Asymmetric, GateMode::Symmetric, GateMode::None})
    if (to_string(g) == text) return g;
  fail(ErrorCode::InvalidArgument, "unknown gate mode '" + std::string(text) + "'");
}

struct MGPOConfig {
  double beta = 0.5;
  double omega = 0.5;
  double tau_pos = 1.0;
  double tau_neg = 1.05;
  std::size_t group_size = 8;
  double sigma_floor = 1e-6;
  /// Symmetric uses tau_pos for both signs; None disables the gate.
  GateMode gate = GateMode::Asymmetric;

  void validate() const {
    require(beta > 0.0, ErrorCode::InvalidArgument, "beta must be > 0");
    require(omega >= 0.0, ErrorCode::InvalidArgument, "omega must be >= 0");
    require(tau_pos > 0.0 && tau_neg > 0.0, ErrorCode::InvalidArgument, "gate temperatures must be > 0");
    require(tau_neg > tau_pos, ErrorCode::InvalidArgument, "tau_neg must exceed tau_pos");
    require(sigma_floor > 0.0, ErrorCode::InvalidArgument, "sigma_floor must be > 0");
    require(group_size >= 2, ErrorCode::InvalidArgument, "group_size must be >= 2");
  }
};

// ---------------------------------------------------------------------------
// Batch layout shared by the losses

struct StepSpec {
  CognitiveStage stage = CognitiveStage::Draft;
  double process_reward = 0.0;
  std::size_t num_tokens = 1;
};

struct EpisodeSpec {
  std::size_t group = 0;
  double terminal_reward = 0.0;
  std::vector<StepSpec> steps;
};

using Batch = std::vector<EpisodeSpec>;

/// [episode][step][token]
using TokenValues = std::vector<std::vector<std::vector<double>>>;
/// [episode][step]
template <typename T>
using PerStep = std::vector<std::vector<T>>;

struct PolicyEval {
  TokenValues theta;
  TokenValues ref;
  TokenValues old;
};

inline std::size_t total_tokens(const Batch& batch) {
  std::size_t n = 0;
  for (const auto& e : batch)
    for (const auto& s : e.steps) n += s.num_tokens;
  return n;
}

inline TokenValues zeros_like(const Batch& batch) {
  TokenValues out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out[i].resize(batch[i].steps.size());
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) out[i][t].assign(batch[i].steps[t].num_tokens, 0.0);
  }
  return out;
}

namespace detail {

inline void check_alignment(const Batch& batch, const TokenValues& lp, const char* which, bool require_nonpositive) {
  require(lp.size() == batch.size(), ErrorCode::InvalidArgument, std::string(which) + ": episode count mismatch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require(lp[i].size() == batch[i].steps.size(), ErrorCode::InvalidArgument,
            std::string(which) + ": step count mismatch");
    for (std::size_t t = 0; t < lp[i].size(); ++t) {
      require(lp[i][t].size() == batch[i].steps[t].num_tokens, ErrorCode::InvalidArgument,
              std::string(which) + ": token count mismatch");
      for (double v : lp[i][t]) {
        require(std::isfinite(v), ErrorCode::NonFiniteLogProb, std::string(which) + " log-probability is not finite");
        if (require_nonpositive)
          require(v <= 0.0, ErrorCode::InvalidArgument, std::string(which) + " log-probability is positive");
      }
    }
  }
}

inline double step_sum(const std::vector<double>& tokens) {
  double s = 0.0;
  for (double v : tokens) s += v;
  return s;
}

}  // namespace detail

inline void validate_eval(const Batch& batch, const PolicyEval& eval) {
  detail::check_alignment(batch, eval.theta, "pi_theta", true);
  detail::check_alignment(batch, eval.ref, "pi_ref", true);
  detail::check_alignment(batch, eval.old, "pi_old", true);
}

// ---------------------------------------------------------------------------
// Advantages

/// (x - mean) / sd with the population sd, dividing by `floor` instead when
/// sd < floor.
inline std::vector<double> standardize(std::span<const double> values, double floor) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  // Identical values: the rounded mean may be off by an ulp, which the floor
  // would amplify.
  if (std::all_of(out.begin(), out.end(), [&](double v) { return v == out.front(); })) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.size());
  const double sd = std::sqrt(var);
  const double denom = sd < floor ? floor : sd;
  for (auto& v : out) v = (v - mean) / denom;
  return out;
}

inline std::vector<double> trajectory_advantages(std::span<const double> terminal_rewards, const MGPOConfig& cfg) {
  require(terminal_rewards.size() >= 2, ErrorCode::GroupTooSmall, "trajectory group needs at least 2 episodes");
  return standardize(terminal_rewards, cfg.sigma_floor);
}

/// Standardizes process rewards independently within each stage subgroup.
inline std::vector<double> stage_advantages(std::span<const std::pair<CognitiveStage, double>> process_rewards,
                                            const MGPOConfig& cfg) {
  std::map<CognitiveStage, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < process_rewards.size(); ++i) groups[process_rewards[i].first].push_back(i);
  std::vector<double> out(process_rewards.size(), 0.0);
  for (const auto& [stage, idx] : groups) {
    std::vector<double> values;
    for (auto i : idx) values.push_back(process_rewards[i].second);
    const auto z = standardize(values, cfg.sigma_floor);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = z[j];
  }
  return out;
}

inline PerStep<double> fuse_advantages(std::span<const double> episode_adv, const PerStep<double>& step_adv,
                                       const MGPOConfig& cfg) {
  require(episode_adv.size() == step_adv.size(), ErrorCode::InvalidArgument, "advantage shape mismatch");
  PerStep<double> fused(step_adv.size());
  for (std::size_t i = 0; i < step_adv.size(); ++i)
    for (double a_s : step_adv[i]) fused[i].push_back(episode_adv[i] + cfg.omega * a_s);
  return fused;
}

struct AdvantageRecord {
  double trajectory = 0.0;  // A_E of the step's episode
  double stage_level = 0.0;  // A_S
  double fused = 0.0;
  CognitiveStage stage = CognitiveStage::Draft;
};

/// Trajectory advantages per rollout group (episodes sharing `group`),
/// stage advantages across the whole batch, then fusion.
inline PerStep<AdvantageRecord> compute_advantages(const Batch& batch, const MGPOConfig& cfg) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch[i].group].push_back(i);
  std::vector<double> a_e(batch.size(), 0.0);
  for (const auto& [g, idx] : groups) {
    std::vector<double> rewards;
    for (auto i : idx) rewards.push_back(batch[i].terminal_reward);
    const auto adv = trajectory_advantages(rewards, cfg);
    for (std::size_t j = 0; j < idx.size(); ++j) a_e[idx[j]] = adv[j];
  }

  std::vector<std::pair<CognitiveStage, double>> flat;
  for (const auto& e : batch)
    for (const auto& s : e.steps) flat.emplace_back(s.stage, s.process_reward);
  const auto a_s_flat = stage_advantages(flat, cfg);

  PerStep<double> a_s(batch.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) a_s[i].push_back(a_s_flat[k++]);
  const auto fused = fuse_advantages(a_e, a_s, cfg);

  PerStep<AdvantageRecord> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t)
      out[i].push_back({a_e[i], a_s[i][t], fused[i][t], batch[i].steps[t].stage});
  return out;
}

// ---------------------------------------------------------------------------
// Weights and gate

/// sech^2(x) evaluated as 4e^{-2|x|} / (1 + e^{-2|x|})^2; exactly 1 at x = 0.
inline double sech2(double x) {
  const double e = std::exp(-2.0 * std::fabs(x));
  return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

inline double sech2_gate(double weight, double ratio, const MGPOConfig& cfg) {
  require(std::isfinite(ratio) && ratio > 0.0, ErrorCode::NonPositiveRatio, "importance ratio must be > 0");
  if (cfg.gate == GateMode::None) return weight;
  const double tau = (cfg.gate == GateMode::Symmetric || weight >= 0.0) ? cfg.tau_pos : cfg.tau_neg;
  return sech2(0.5 * tau * (ratio - 1.0)) * weight;
}

struct WeightRecord {
  double implicit_reward = 0.0;
  double centered_advantage = 0.0;
  double centered_implicit = 0.0;
  double weight = 0.0;
  double ratio = 1.0;
  double gated_weight = 0.0;
};

/// Per-step weights. Implicit reward and importance ratio aggregate the
/// step's tokens: R = beta * sum_j (log pi_theta - log pi_ref),
/// ratio = exp(sum_j (log pi_theta - log pi_old)).
inline PerStep<WeightRecord> mgpo_weights(const PerStep<double>& fused, const Batch& batch, const PolicyEval& eval,
                                          const MGPOConfig& cfg) {
  validate_eval(batch, eval);
  require(fused.size() == batch.size(), ErrorCode::InvalidArgument, "fused advantage shape mismatch");
  PerStep<WeightRecord> out(batch.size());
  std::map<CognitiveStage, std::pair<double, double>> sums;  // (sum fused, sum implicit)
  std::map<CognitiveStage, std::size_t> counts;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require(fused[i].size() == batch[i].steps.size(), ErrorCode::InvalidArgument, "fused advantage shape mismatch");
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      WeightRecord w;
      w.implicit_reward = cfg.beta * (detail::step_sum(eval.theta[i][t]) - detail::step_sum(eval.ref[i][t]));
      w.ratio = std::exp(detail::step_sum(eval.theta[i][t]) - detail::step_sum(eval.old[i][t]));
      const auto stage = batch[i].steps[t].stage;
      sums[stage].first += fused[i][t];
      sums[stage].second += w.implicit_reward;
      ++counts[stage];
      out[i].push_back(w);
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      const auto stage = batch[i].steps[t].stage;
      const double n = static_cast<double>(counts[stage]);
      auto& w = out[i][t];
      w.centered_advantage = fused[i][t] - sums[stage].first / n;
      w.centered_implicit = w.implicit_reward - sums[stage].second / n;
      w.weight = w.centered_advantage - w.centered_implicit;
      w.gated_weight = sech2_gate(w.weight, w.ratio, cfg);
    }
  }
  return out;
}

/// Sum of raw weights per stage group; zero up to rounding.
inline std::map<CognitiveStage, double> stage_weight_sums(const Batch& batch, const PerStep<WeightRecord>& weights) {
  std::map<CognitiveStage, double> sums;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) sums[batch[i].steps[t].stage] += weights[i][t].weight;
  return sums;
}

// ---------------------------------------------------------------------------
// Losses

struct LossResult {
  double loss = 0.0;
  /// d loss / d log pi_theta for every token.
  TokenValues token_grad;
};

/// -(1/N) sum_{i,t,j} c_{i,t} log pi_theta(x_{i,t,j}) with constant per-step
/// coefficients c.
inline double weighted_token_loss(const TokenValues& theta, const PerStep<double>& coeff, std::size_t num_tokens) {
  double acc = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i)
    for (std::size_t t = 0; t < theta[i].size(); ++t) acc += coeff[i][t] * detail::step_sum(theta[i][t]);
  return -acc / static_cast<double>(num_tokens);
}

struct MgpoDiagnostics {
  double mean_abs_gated_weight = 0.0;
  double max_abs_stage_weight_sum = 0.0;
  /// Counts of gate factors |w'|/|w| in [0,0.2), [0.2,0.4), ..., [0.8,1.0].
  std::vector<std::size_t> gate_histogram = std::vector<std::size_t>(5, 0);
};

struct MgpoLossResult : LossResult {
  PerStep<AdvantageRecord> advantages;
  PerStep<WeightRecord> weights;
  std::size_t num_tokens = 0;
  MgpoDiagnostics diagnostics;
};

inline MgpoLossResult mgpo_loss(const Batch& batch, const PolicyEval& eval, const MGPOConfig& cfg) {
  const auto n = total_tokens(batch);
  require(!batch.empty() && n > 0, ErrorCode::EmptyBatch, "MGPO batch has no tokens");
  MgpoLossResult out;
  out.num_tokens = n;
  out.advantages = compute_advantages(batch, cfg);
  PerStep<double> fused(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (const auto& a : out.advantages[i]) fused[i].push_back(a.fused);
  out.weights = mgpo_weights(fused, batch, eval, cfg);

  PerStep<double> gated(batch.size());
  out.token_grad = zeros_like(batch);
  std::size_t steps = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      const auto& w = out.weights[i][t];
      gated[i].push_back(w.gated_weight);
      for (auto& g : out.token_grad[i][t]) g = -w.gated_weight / static_cast<double>(n);
      out.diagnostics.mean_abs_gated_weight += std::fabs(w.gated_weight);
      const double factor = w.weight == 0.0 ? 1.0 : std::fabs(w.gated_weight / w.weight);
      const auto bin = std::min<std::size_t>(4, static_cast<std::size_t>(factor * 5.0));
      ++out.diagnostics.gate_histogram[bin];
      ++steps;
    }
  }
  if (steps > 0) out.diagnostics.mean_abs_gated_weight /= static_cast<double>(steps);
  for (const auto& [stage, s] : stage_weight_sums(batch, out.weights))
    out.diagnostics.max_abs_stage_weight_sum = std::max(out.diagnostics.max_abs_stage_weight_sum, std::fabs(s));
  out.loss = weighted_token_loss(eval.theta, gated, n);
  return out;
}

/// Behavioral cloning: mean over trajectories of the summed negative
/// log-likelihood of their action tokens. Only verifier-valid trajectories
/// are admissible.
inline LossResult sft_loss(const std::vector<Trajectory>& expert, const TokenValues& theta) {
  require(!expert.empty(), ErrorCode::EmptyBatch, "no expert trajectories");
  require(theta.size() == expert.size(), ErrorCode::InvalidArgument, "log-prob shape mismatch");
  LossResult out;
  out.token_grad.resize(expert.size());
  const double d = static_cast<double>(expert.size());
  for (std::size_t i = 0; i < expert.size(); ++i) {
    const auto& traj = expert[i];
    require(traj.terminal.has_value() && traj.terminal->verdict.valid == 1, ErrorCode::InvalidExpertTrajectory,
            "expert trajectory '" + traj.episode_id + "' is not verifier-valid");
    require(theta[i].size() == traj.steps.size(), ErrorCode::InvalidArgument, "log-prob shape mismatch");
    out.token_grad[i].resize(traj.steps.size());
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      require(theta[i][t].size() == traj.steps[t].action.tokens.size(), ErrorCode::InvalidArgument,
              "token count mismatch");
      for (double v : theta[i][t]) {
        require(std::isfinite(v), ErrorCode::NonFiniteLogProb, "expert log-probability is not finite");
        out.loss -= v / d;
      }
      out.token_grad[i][t].assign(theta[i][t].size(), -1.0 / d);
    }
  }
  return out;
}

/// Token-level clipped surrogate with group-standardized terminal advantages
/// and the k3 estimator of KL(pi_theta || pi_ref), averaged over all tokens.
/// Pass an infinite clip_epsilon to disable clipping.
inline LossResult grpo_loss(const Batch& batch, const PolicyEval& eval, double clip_epsilon, double kl_beta,
                            double sigma_floor = 1e-6) {
  validate_eval(batch, eval);
  const auto n = total_tokens(batch);
  require(!batch.empty() && n > 0, ErrorCode::EmptyBatch, "GRPO batch has no tokens");
  MGPOConfig std_cfg;
  std_cfg.sigma_floor = sigma_floor;
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch[i].group].push_back(i);
  std::vector<double> adv(batch.size(), 0.0);
  for (const auto& [g, idx] : groups) {
    std::vector<double> rewards;
    for (auto i : idx) rewards.push_back(batch[i].terminal_reward);
    const auto a = trajectory_advantages(rewards, std_cfg);
    for (std::size_t j = 0; j < idx.size(); ++j) adv[idx[j]] = a[j];
  }

  LossResult out;
  out.token_grad = zeros_like(batch);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double a = adv[i];
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      for (std::size_t j = 0; j < batch[i].steps[t].num_tokens; ++j) {
        const double lt = eval.theta[i][t][j];
        const double r = std::exp(lt - eval.old[i][t][j]);
        const double clipped = std::clamp(r, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
        const double unclipped_term = r * a;
        const double clipped_term = clipped * a;
        const double ref_over_theta = std::exp(eval.ref[i][t][j] - lt);
        const double kl = ref_over_theta - (eval.ref[i][t][j] - lt) - 1.0;
        double grad = kl_beta * (1.0 - ref_over_theta);
        if (unclipped_term <= clipped_term) {
          out.loss -= unclipped_term * inv_n;
          grad -= unclipped_term;
        } else {
          out.loss -= clipped_term * inv_n;
        }
        out.loss += kl_beta * kl * inv_n;
        out.token_grad[i][t][j] = grad * inv_n;
      }
    }
  }
  return out;
}

/// Closed-form optimum of the KL-regularized objective:
/// pi*(a) proportional to ref(a) * exp(R(a) / beta).
inline std::vector<double> tabular_optimal_policy(std::span<const double> ref, std::span<const double> rewards,
                                                  double beta) {
  require(ref.size() == rewards.size() && !ref.empty(), ErrorCode::InvalidArgument, "shape mismatch");
  require(beta > 0.0, ErrorCode::InvalidArgument, "beta must be > 0");
  std::vector<double> logits(ref.size());
  for (std::size_t a = 0; a < ref.size(); ++a) {
    require(ref[a] > 0.0, ErrorCode::InvalidArgument, "reference policy must be strictly positive");
    logits[a] = std::log(ref[a]) + rewards[a] / beta;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  for (auto& l : logits) l /= z;
  return logits;
}

}  // namespace agentic
