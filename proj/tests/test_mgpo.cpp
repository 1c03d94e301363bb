#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "agentic/mgpo.hpp"
#include "agentic/policy.hpp"
#include "support.hpp"

namespace {

using namespace agentic;
namespace ts = testing_support;

using S = CognitiveStage;

std::optional<ErrorCode> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// One-token steps with the given stages; log-probs filled from `theta`, `ref`.
struct Handmade {
  Batch batch;
  PolicyEval eval;
};

Handmade single_token_batch(const std::vector<std::pair<S, double>>& steps, const std::vector<double>& theta,
                            const std::vector<double>& ref) {
  Handmade h;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    EpisodeSpec e;
    e.group = 0;
    e.steps.push_back({steps[k].first, steps[k].second, 1});
    h.batch.push_back(e);
    h.eval.theta.push_back({{theta[k]}});
    h.eval.ref.push_back({{ref[k]}});
    h.eval.old.push_back({{theta[k]}});
  }
  return h;
}

Skill skill(std::string name, double difficulty) {
  Skill s;
  s.name = std::move(name);
  s.category = "Classical Mechanics";
  s.intent = "i";
  s.method = "m";
  s.difficulty_effect = difficulty;
  return s;
}

/// Valid expert trajectories with their decisions and token layout.
struct ExpertSet {
  std::vector<Trajectory> trajectories;
  Decisions decisions;
  Batch batch;
};

ExpertSet expert_set(std::size_t count) {
  ExpertSet out;
  const std::vector<Skill> skills{skill("a", 2.0), skill("b", 5.0), skill("c", 8.0)};
  for (std::size_t k = 0; k < count; ++k) {
    SyntheticTask task;
    task.rng_seed = k;
    auto traj = scripted_expert(task, skills);
    VerifierVerdict v;
    v.valid = 1;
    v.reason = RejectionReason::None;
    traj.terminal = Terminal{*traj.submission, v, ProbeResult{}, 1.0};
    EpisodeSpec e;
    for (const auto& s : traj.steps) e.steps.push_back({s.observation.stage, s.process_reward, s.action.tokens.size()});
    out.decisions.push_back(decisions_for(traj, 32));
    out.batch.push_back(e);
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

SoftmaxPolicy with_params(SoftmaxPolicy p, const std::vector<double>& params) {
  p.params() = params;
  return p;
}

// --- advantages -------------------------------------------------------------

TEST(TrajectoryAdvantagesTest, EqualRewardsGiveZeros) {
  const std::vector<double> r{1, 1, 1};
  EXPECT_EQ(trajectory_advantages(r, MGPOConfig{}), (std::vector<double>{0, 0, 0}));
}

TEST(TrajectoryAdvantagesTest, TwoRewards) {
  const std::vector<double> r{0, 2};
  EXPECT_EQ(trajectory_advantages(r, MGPOConfig{}), (std::vector<double>{-1, 1}));
}

TEST(TrajectoryAdvantagesTest, ThreeRewards) {
  const std::vector<double> r{1, 2, 3};
  const auto a = trajectory_advantages(r, MGPOConfig{});
  const double sigma = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(a[0], -1 / sigma, 1e-15);
  EXPECT_NEAR(a[1], 0.0, 1e-15);
  EXPECT_NEAR(a[2], 1 / sigma, 1e-15);
}

TEST(TrajectoryAdvantagesTest, GroupTooSmall) {
  const std::vector<double> r{1};
  EXPECT_EQ(code_of([&] { trajectory_advantages(r, MGPOConfig{}); }), ErrorCode::GroupTooSmall);
}

TEST(TrajectoryAdvantagesTest, MatchesOracleOnRandomGroups) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(2, 16);
  std::normal_distribution<double> reward(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r(static_cast<std::size_t>(size(rng)));
    for (auto& x : r) x = reward(rng);
    if (trial % 7 == 0) std::fill(r.begin(), r.end(), r[0]);
    const auto a = trajectory_advantages(r, MGPOConfig{});
    const auto o = ts::oracle_standardize(r, 1e-6);
    double mean = 0, sq = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a[k], o[k], 1e-9);
      mean += a[k];
    }
    mean /= static_cast<double>(a.size());
    for (double x : a) sq += (x - mean) * (x - mean);
    EXPECT_LT(std::fabs(mean), 1e-9);
    if (trial % 7 != 0) {
      EXPECT_NEAR(std::sqrt(sq / static_cast<double>(a.size())), 1.0, 1e-9);
    }
  }
}

TEST(StageAdvantagesTest, SameStageEqualRewards) {
  const std::vector<std::pair<S, double>> p{{S::Draft, 0.1}, {S::Draft, 0.1}, {S::Draft, 0.1}};
  EXPECT_EQ(stage_advantages(p, MGPOConfig{}), (std::vector<double>{0, 0, 0}));
}

TEST(StageAdvantagesTest, TwoStagesStandardizedSeparately) {
  const std::vector<std::pair<S, double>> p{{S::Draft, 0.0}, {S::Check, 0.0}, {S::Draft, 0.2}, {S::Check, 0.2}};
  const auto a = stage_advantages(p, MGPOConfig{});
  ASSERT_EQ(a.size(), 4u);
  EXPECT_NEAR(a[0], -1.0, 1e-12);
  EXPECT_NEAR(a[1], -1.0, 1e-12);
  EXPECT_NEAR(a[2], 1.0, 1e-12);
  EXPECT_NEAR(a[3], 1.0, 1e-12);
}

TEST(StageAdvantagesTest, SingletonIsZero) {
  const std::vector<std::pair<S, double>> p{{S::Draft, 0.0}, {S::Draft, 0.2}, {S::Refine, 0.05}};
  EXPECT_EQ(stage_advantages(p, MGPOConfig{})[2], 0.0);
}

TEST(FuseAdvantagesTest, OmegaZeroBroadcasts) {
  MGPOConfig cfg;
  cfg.omega = 0.0;
  const std::vector<double> a_e{0.5, -0.5};
  const auto f = fuse_advantages(a_e, {{1.0, 2.0}, {3.0}}, cfg);
  EXPECT_EQ(f, (PerStep<double>{{0.5, 0.5}, {-0.5}}));
}

TEST(FuseAdvantagesTest, Arithmetic) {
  MGPOConfig cfg;
  cfg.omega = 0.5;
  const std::vector<double> a_e{1.0};
  EXPECT_EQ(fuse_advantages(a_e, {{2.0}}, cfg)[0][0], 2.0);
}

TEST(FuseAdvantagesTest, LinearOnRandomBatches) {
  std::mt19937_64 rng(2);
  MGPOConfig cfg;
  cfg.omega = 0.73;
  for (int trial = 0; trial < 50; ++trial) {
    const auto rb = ts::random_batch(rng, 3, 2, 6);
    for (const auto& ep : compute_advantages(rb.batch, cfg))
      for (const auto& a : ep) EXPECT_NEAR(a.fused - a.trajectory, cfg.omega * a.stage_level, 1e-12);
  }
}

TEST(ComputeAdvantagesTest, GroupsAreIndependent) {
  Batch b;
  for (double r : {0.0, 2.0, 5.0, 5.0}) {
    EpisodeSpec e;
    e.group = r < 3 ? 0 : 1;
    e.terminal_reward = r;
    e.steps.push_back({S::Draft, 0.0, 1});
    b.push_back(e);
  }
  const auto a = compute_advantages(b, MGPOConfig{});
  EXPECT_EQ(a[0][0].trajectory, -1.0);
  EXPECT_EQ(a[1][0].trajectory, 1.0);
  EXPECT_EQ(a[2][0].trajectory, 0.0);
  EXPECT_EQ(a[3][0].trajectory, 0.0);
}

// --- weights ----------------------------------------------------------------

TEST(MgpoWeightsTest, HandComputedPair) {
  auto h = single_token_batch({{S::Check, 0}, {S::Check, 0}}, {-1.0, -1.3}, {-1.3, -1.0});
  MGPOConfig cfg;
  cfg.beta = 1.0;
  const auto w = mgpo_weights({{1.0}, {-1.0}}, h.batch, h.eval, cfg);
  EXPECT_NEAR(w[0][0].centered_implicit, 0.3, 1e-12);
  EXPECT_NEAR(w[1][0].centered_implicit, -0.3, 1e-12);
  EXPECT_NEAR(w[0][0].weight, 0.7, 1e-12);
  EXPECT_NEAR(w[1][0].weight, -0.7, 1e-12);
  EXPECT_EQ(w[0][0].ratio, 1.0);
  EXPECT_EQ(w[0][0].gated_weight, w[0][0].weight);
}

TEST(MgpoWeightsTest, ReferencePolicyGivesCenteredAdvantage) {
  std::mt19937_64 rng(4);
  const MGPOConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    auto rb = ts::random_batch(rng, 2, 2, 5);
    rb.eval.ref = rb.eval.theta;
    const auto adv = compute_advantages(rb.batch, cfg);
    PerStep<double> fused(adv.size());
    for (std::size_t i = 0; i < adv.size(); ++i)
      for (const auto& a : adv[i]) fused[i].push_back(a.fused);
    const auto w = mgpo_weights(fused, rb.batch, rb.eval, cfg);
    for (std::size_t i = 0; i < w.size(); ++i)
      for (const auto& r : w[i]) {
        EXPECT_EQ(r.implicit_reward, 0.0);
        EXPECT_EQ(r.weight, r.centered_advantage);
      }
  }
}

TEST(MgpoWeightsTest, ZeroSumPerStageGroup) {
  std::mt19937_64 rng(5);
  MGPOConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    const auto rb = ts::random_batch(rng, 1 + trial % 4, 2, 16);
    const auto res = mgpo_loss(rb.batch, rb.eval, cfg);
    for (const auto& [stage, sum] : stage_weight_sums(rb.batch, res.weights)) EXPECT_LT(std::fabs(sum), 1e-9);
    EXPECT_LT(res.diagnostics.max_abs_stage_weight_sum, 1e-9);
  }
}

TEST(MgpoWeightsTest, NonFiniteLogProb) {
  auto h = single_token_batch({{S::Draft, 0}, {S::Draft, 0}}, {-1.0, -1.0}, {-1.0, -1.0});
  h.eval.ref[1][0][0] = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(code_of([&] { mgpo_weights({{0.0}, {0.0}}, h.batch, h.eval, MGPOConfig{}); }),
            ErrorCode::NonFiniteLogProb);
  h.eval.ref[1][0][0] = std::nan("");
  EXPECT_EQ(code_of([&] { mgpo_weights({{0.0}, {0.0}}, h.batch, h.eval, MGPOConfig{}); }),
            ErrorCode::NonFiniteLogProb);
}

// --- gate -------------------------------------------------------------------

TEST(Sech2GateTest, UnitRatioIsIdentity) {
  const MGPOConfig cfg;
  EXPECT_EQ(sech2(0.0), 1.0);
  for (double w : {-3.0, -1.0, 0.0, 0.25, 7.0}) EXPECT_EQ(sech2_gate(w, 1.0, cfg), w);
}

TEST(Sech2GateTest, NegativeBranchValue) {
  const MGPOConfig cfg;
  EXPECT_NEAR(sech2_gate(-1.0, 2.0, cfg), -ts::naive_sech2(0.525), 1e-12);
  EXPECT_NEAR(sech2_gate(-1.0, 2.0, cfg), -0.7681097916952943, 1e-12);
}

TEST(Sech2GateTest, MatchesDefinition) {
  for (double x = -20.0; x <= 20.0; x += 0.01) EXPECT_NEAR(sech2(x), ts::naive_sech2(x), 1e-14);
  EXPECT_GT(sech2(300.0), 0.0);
  EXPECT_LE(sech2(1e-300), 1.0);
}

TEST(Sech2GateTest, AsymmetricAttenuation) {
  const MGPOConfig cfg;
  for (double r : {0.2, 0.7, 0.99, 1.01, 1.5, 3.0}) {
    const double pos = sech2_gate(1.0, r, cfg);
    const double neg = sech2_gate(-1.0, r, cfg);
    EXPECT_GT(pos, 0.0);
    EXPECT_LT(neg, 0.0);
    EXPECT_LT(std::fabs(neg), std::fabs(pos)) << r;
    EXPECT_LT(pos, 1.0);
  }
}

TEST(Sech2GateTest, Modes) {
  MGPOConfig cfg;
  cfg.gate = GateMode::Symmetric;
  EXPECT_EQ(std::fabs(sech2_gate(-1.0, 1.7, cfg)), sech2_gate(1.0, 1.7, cfg));
  cfg.gate = GateMode::None;
  EXPECT_EQ(sech2_gate(-0.4, 5.0, cfg), -0.4);
  EXPECT_EQ(parse_gate_mode(to_string(GateMode::Symmetric)), GateMode::Symmetric);
}

TEST(Sech2GateTest, NonPositiveRatio) {
  const MGPOConfig cfg;
  EXPECT_EQ(code_of([&] { sech2_gate(1.0, 0.0, cfg); }), ErrorCode::NonPositiveRatio);
  EXPECT_EQ(code_of([&] { sech2_gate(1.0, -2.0, cfg); }), ErrorCode::NonPositiveRatio);
}

TEST(Sech2GateTest, BoundsAndSignOnRandomBatches) {
  std::mt19937_64 rng(6);
  const MGPOConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const auto rb = ts::random_batch(rng, 2, 2, 8);
    for (const auto& ep : mgpo_loss(rb.batch, rb.eval, cfg).weights)
      for (const auto& w : ep) {
        EXPECT_LE(std::fabs(w.gated_weight), std::fabs(w.weight));
        if (w.weight != 0.0) {
          EXPECT_EQ(std::signbit(w.gated_weight), std::signbit(w.weight));
          if (w.ratio != 1.0) {
            EXPECT_LT(std::fabs(w.gated_weight), std::fabs(w.weight));
          }
        }
      }
  }
}

TEST(MgpoConfigTest, Validation) {
  MGPOConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tau_neg = cfg.tau_pos;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = MGPOConfig{};
  cfg.beta = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

// --- losses -----------------------------------------------------------------

TEST(MgpoLossTest, ZeroWeightsZeroLoss) {
  auto h = single_token_batch({{S::Draft, 0.1}, {S::Draft, 0.1}}, {-0.7, -0.2}, {-0.7, -0.2});
  const auto res = mgpo_loss(h.batch, h.eval, MGPOConfig{});
  EXPECT_EQ(res.loss, 0.0);
  for (const auto& ep : res.token_grad)
    for (const auto& st : ep)
      for (double g : st) EXPECT_EQ(g, 0.0);
}

TEST(MgpoLossTest, TokenNormalization) {
  EXPECT_EQ(weighted_token_loss({{{-0.5, -0.5}}}, {{1.0}}, 2), 0.5);
}

TEST(MgpoLossTest, GradientIsNegativeWeightOverTokens) {
  std::mt19937_64 rng(8);
  const auto rb = ts::random_batch(rng, 2, 3, 5);
  const auto res = mgpo_loss(rb.batch, rb.eval, MGPOConfig{});
  for (std::size_t i = 0; i < rb.batch.size(); ++i)
    for (std::size_t t = 0; t < rb.batch[i].steps.size(); ++t)
      for (double g : res.token_grad[i][t])
        EXPECT_DOUBLE_EQ(g, -res.weights[i][t].gated_weight / static_cast<double>(res.num_tokens));
  std::size_t binned = 0;
  for (auto c : res.diagnostics.gate_histogram) binned += c;
  std::size_t steps = 0;
  for (const auto& e : rb.batch) steps += e.steps.size();
  EXPECT_EQ(binned, steps);
}

TEST(MgpoLossTest, EmptyBatch) {
  EXPECT_EQ(code_of([] { mgpo_loss({}, {}, MGPOConfig{}); }), ErrorCode::EmptyBatch);
}

TEST(MgpoLossTest, FiniteDifferenceOnToyPolicy) {
  std::mt19937_64 rng(9);
  const MGPOConfig cfg;
  for (int point = 0; point < 100; ++point) {
    const auto tp = ts::random_toy_problem(rng);
    const auto res = mgpo_loss(tp.batch, ts::toy_eval(tp, tp.policy), cfg);
    PerStep<double> frozen(tp.batch.size());
    for (std::size_t i = 0; i < tp.batch.size(); ++i)
      for (const auto& w : res.weights[i]) frozen[i].push_back(w.gated_weight);
    const auto analytic = param_gradient(tp.policy, tp.decisions, res.token_grad);
    const auto numeric = ts::finite_difference(
        [&](const std::vector<double>& p) {
          return weighted_token_loss(token_log_probs(with_params(tp.policy, p), tp.decisions, tp.batch), frozen,
                                     res.num_tokens);
        },
        tp.policy.params());
    EXPECT_LT(ts::relative_error(analytic, numeric), 1e-4) << "point " << point;
  }
}

TEST(GrpoLossTest, OnPolicyZeroAdvantageIsKlOnly) {
  auto h = single_token_batch({{S::Draft, 0}, {S::Draft, 0}}, {-1.0, -0.5}, {-1.2, -0.4});
  const double kl = (std::exp(-0.2) + 0.2 - 1 + std::exp(0.1) - 0.1 - 1) / 2;
  EXPECT_NEAR(grpo_loss(h.batch, h.eval, 0.2, 0.05).loss, 0.05 * kl, 1e-15);
}

TEST(GrpoLossTest, ClippedPositiveAdvantage) {
  auto h = single_token_batch({{S::Draft, 0}, {S::Draft, 0}}, {-0.5, -1.0}, {-0.5, -1.0});
  h.batch[0].terminal_reward = 2.0;  // advantages (1, -1)
  h.eval.old[0][0][0] = -1.0;        // ratio e^{0.5} > 1.2
  h.eval.ref = h.eval.theta;
  const auto res = grpo_loss(h.batch, h.eval, 0.2, 0.0);
  EXPECT_NEAR(res.loss, -(1.2 * 1.0 + 1.0 * -1.0) / 2, 1e-15);
  EXPECT_EQ(res.token_grad[0][0][0], 0.0);
  EXPECT_NE(res.token_grad[1][0][0], 0.0);
}

TEST(GrpoLossTest, GroupTooSmall) {
  auto h = single_token_batch({{S::Draft, 0}}, {-1.0}, {-1.0});
  EXPECT_EQ(code_of([&] { grpo_loss(h.batch, h.eval, 0.2, 0.05); }), ErrorCode::GroupTooSmall);
}

TEST(GrpoLossTest, FiniteDifferenceOnToyPolicy) {
  std::mt19937_64 rng(10);
  for (int point = 0; point < 100; ++point) {
    const auto tp = ts::random_toy_problem(rng);
    const auto res = grpo_loss(tp.batch, ts::toy_eval(tp, tp.policy), 0.2, 0.05);
    const auto analytic = param_gradient(tp.policy, tp.decisions, res.token_grad);
    const auto numeric = ts::finite_difference(
        [&](const std::vector<double>& p) {
          return grpo_loss(tp.batch, ts::toy_eval(tp, with_params(tp.policy, p)), 0.2, 0.05).loss;
        },
        tp.policy.params());
    EXPECT_LT(ts::relative_error(analytic, numeric), 1e-4) << "point " << point;
  }
}

// With theta = ref = old, one stage and equal episode lengths, MGPO without
// the gate or stage term and unclipped GRPO without KL share a gradient.
TEST(GrpoLossTest, AgreesWithReducedMgpo) {
  std::mt19937_64 rng(12);
  MGPOConfig cfg;
  cfg.omega = 0.0;
  cfg.gate = GateMode::None;
  for (int trial = 0; trial < 20; ++trial) {
    auto tp = ts::random_toy_problem(rng);
    tp.reference = tp.policy;
    tp.old = tp.policy;
    for (auto& ep : tp.batch) {
      ep.steps.resize(1);
      ep.steps[0].stage = S::Draft;
    }
    for (auto& d : tp.decisions) d.resize(1);
    const auto eval = ts::toy_eval(tp, tp.policy);
    const auto g_mgpo = param_gradient(tp.policy, tp.decisions, mgpo_loss(tp.batch, eval, cfg).token_grad);
    const auto g_grpo = param_gradient(
        tp.policy, tp.decisions, grpo_loss(tp.batch, eval, std::numeric_limits<double>::infinity(), 0.0).token_grad);
    for (std::size_t k = 0; k < g_mgpo.size(); ++k) {
      if (std::fabs(g_grpo[k]) > 1e-12) {
        EXPECT_EQ(std::signbit(g_mgpo[k]), std::signbit(g_grpo[k]));
      }
      EXPECT_NEAR(g_mgpo[k], g_grpo[k], 1e-12);
    }
  }
}

TEST(SftLossTest, CertainPolicyHasZeroLoss) {
  const auto ex = expert_set(3);
  EXPECT_EQ(sft_loss(ex.trajectories, zeros_like(ex.batch)).loss, 0.0);
}

TEST(SftLossTest, UniformOverFourActions) {
  auto ex = expert_set(1);
  ex.trajectories[0].steps.resize(3);
  ex.batch[0].steps.resize(3);
  ex.decisions[0].resize(3);
  for (auto& d : ex.decisions[0]) {
    d.legal = {true, true, true, true, false};
    d.choice = 0;
  }
  const SoftmaxPolicy uniform;
  const auto theta = token_log_probs(uniform, ex.decisions, ex.batch);
  EXPECT_NEAR(sft_loss(ex.trajectories, theta).loss, 3 * std::log(4.0), 1e-12);
}

TEST(SftLossTest, RejectsInvalidExpert) {
  auto ex = expert_set(2);
  ex.trajectories[1].terminal->verdict.valid = 0;
  EXPECT_EQ(code_of([&] { sft_loss(ex.trajectories, zeros_like(ex.batch)); }), ErrorCode::InvalidExpertTrajectory);
  ex.trajectories[1].terminal.reset();
  EXPECT_EQ(code_of([&] { sft_loss(ex.trajectories, zeros_like(ex.batch)); }), ErrorCode::InvalidExpertTrajectory);
}

TEST(SftLossTest, FiniteDifferenceOnToyPolicy) {
  const auto ex = expert_set(4);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> w(0.0, 0.7);
  for (int point = 0; point < 100; ++point) {
    SoftmaxPolicy policy;
    for (auto& x : policy.params()) x = w(rng);
    const auto res = sft_loss(ex.trajectories, token_log_probs(policy, ex.decisions, ex.batch));
    const auto analytic = param_gradient(policy, ex.decisions, res.token_grad);
    const auto numeric = ts::finite_difference(
        [&](const std::vector<double>& p) {
          return sft_loss(ex.trajectories, token_log_probs(with_params(policy, p), ex.decisions, ex.batch)).loss;
        },
        policy.params());
    EXPECT_LT(ts::relative_error(analytic, numeric), 1e-4) << "point " << point;
  }
}

TEST(SftLossTest, GradientDescentDecreasesLoss) {
  const auto ex = expert_set(8);
  SoftmaxPolicy policy;
  double prev = sft_loss(ex.trajectories, token_log_probs(policy, ex.decisions, ex.batch)).loss;
  for (int step = 0; step < 60; ++step) {
    const auto res = sft_loss(ex.trajectories, token_log_probs(policy, ex.decisions, ex.batch));
    const auto g = param_gradient(policy, ex.decisions, res.token_grad);
    for (std::size_t k = 0; k < g.size(); ++k) policy.params()[k] -= 0.02 * g[k];
    const double now = sft_loss(ex.trajectories, token_log_probs(policy, ex.decisions, ex.batch)).loss;
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

// --- tabular optimum ----------------------------------------------------------

TEST(TabularOptimumTest, TwoActions) {
  const std::vector<double> ref{0.5, 0.5}, r{1.0, 0.0};
  const auto p = tabular_optimal_policy(ref, r, 1.0);
  EXPECT_NEAR(p[0], std::exp(1.0) / (1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(p[0], 0.73106, 1e-5);
}

TEST(TabularOptimumTest, ConstantRewardKeepsReference) {
  const std::vector<double> ref{0.1, 0.6, 0.3}, r{2.0, 2.0, 2.0};
  const auto p = tabular_optimal_policy(ref, r, 0.3);
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(p[a], ref[a], 1e-15);
}

TEST(TabularOptimumTest, TemperatureLimits) {
  const std::vector<double> ref{0.2, 0.5, 0.3}, r{0.1, 0.0, 0.4};
  const auto hot = tabular_optimal_policy(ref, r, 100.0);
  const auto cold = tabular_optimal_policy(ref, r, 0.01);
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(hot[a], ref[a], 5e-3);
  EXPECT_GT(cold[2], 0.999);
}

TEST(TabularOptimumTest, ExponentiatedGradientConverges) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.05, 1.0), rr(-1.0, 1.0), eta(0.2, 0.9);
  for (int bandit = 0; bandit < 10; ++bandit) {
    const std::size_t n = 2 + static_cast<std::size_t>(bandit % 9);
    std::vector<double> ref(n), r(n);
    double z = 0;
    for (auto& x : ref) z += (x = u(rng));
    for (auto& x : ref) x /= z;
    for (auto& x : r) x = rr(rng);
    const double beta = 0.5;
    const double step = eta(rng) / beta;
    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    for (int it = 0; it < 200; ++it) {
      double total = 0;
      for (std::size_t a = 0; a < n; ++a) {
        const double grad = r[a] - beta * (std::log(pi[a] / ref[a]) + 1.0);
        pi[a] *= std::exp(step * grad);
        total += pi[a];
      }
      for (auto& x : pi) x /= total;
    }
    const auto star = tabular_optimal_policy(ref, r, beta);
    double tv = 0;
    for (std::size_t a = 0; a < n; ++a) tv += 0.5 * std::fabs(pi[a] - star[a]);
    EXPECT_LT(tv, 1e-6);
  }
}

}  // namespace
