#pragma once

#include <vector>

#include "agentic/environment.hpp"
#include "agentic/errors.hpp"
#include "agentic/verification.hpp"

namespace agentic {

struct RewardConfig {
  double base = 1.0;
  double lambda = 1.0;
  double r_exec = 0.1;
  double r_think = 0.05;

  void validate() const {
    require(base > 0.0, ErrorCode::InvalidArgument, "reward base must be > 0");
    require(lambda > 0.0, ErrorCode::InvalidArgument, "reward lambda must be > 0");
    require(r_exec >= 0.0 && r_think >= 0.0, ErrorCode::InvalidArgument, "process rewards must be >= 0");
  }
};

struct RewardBreakdown {
  double terminal = 0.0;
  std::vector<double> process;
  double total = 0.0;
};

/// r_T = V(q) * (base + 1[rho > 0] * lambda * (1 - rho)). The indicator is
/// applied literally: rho = 0 earns only the base reward.
inline double terminal_reward(const VerifierVerdict& verdict, const ProbeResult& probe, const RewardConfig& cfg) {
  require(probe.pass_rate >= 0.0 && probe.pass_rate <= 1.0, ErrorCode::InvalidArgument,
          "pass rate must lie in [0,1]");
  if (verdict.valid != 1) return 0.0;
  const double bonus = probe.pass_rate > 0.0 ? cfg.lambda * (1.0 - probe.pass_rate) : 0.0;
  return cfg.base + bonus;
}

/// Sets the terminal record and reward; process rewards are left as the
/// environment assigned them.
inline Trajectory attach_rewards(Trajectory traj, const VerifierVerdict& verdict, const ProbeResult& probe,
                                 const RewardConfig& cfg) {
  require(traj.submission.has_value(), ErrorCode::MissingTerminal,
          "trajectory '" + traj.episode_id + "' has no submitted problem");
  traj.terminal = Terminal{*traj.submission, verdict, probe, terminal_reward(verdict, probe, cfg)};
  return traj;
}

/// Truncated trajectories contribute zero terminal reward.
inline RewardBreakdown reward_breakdown(const Trajectory& traj) {
  RewardBreakdown out;
  out.terminal = traj.terminal ? traj.terminal->terminal_reward : 0.0;
  out.total = out.terminal;
  for (const auto& s : traj.steps) {
    out.process.push_back(s.process_reward);
    out.total += s.process_reward;
  }
  return out;
}

}  // namespace agentic
