#pragma once

// Orchestration of the three stages: skill library loading, behavioral
// cloning on scripted-expert demonstrations, and the curriculum-driven
// MGPO loop (sample -> rollout -> verify -> probe -> reward -> update ->
// proficiency update).

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "agentic/backend.hpp"
#include "agentic/config.hpp"
#include "agentic/curriculum.hpp"
#include "agentic/environment.hpp"
#include "agentic/errors.hpp"
#include "agentic/mgpo.hpp"
#include "agentic/policy.hpp"
#include "agentic/records.hpp"
#include "agentic/reward.hpp"
#include "agentic/rng.hpp"
#include "agentic/skill_library.hpp"
#include "agentic/verification.hpp"

namespace agentic {

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Components

using TransportFactory = std::function<Transport(const std::string& endpoint)>;

struct Pipeline {
  RunConfig config;
  SkillLibrary library;
  /// Categories with at least one skill above the quality threshold.
  std::vector<std::string> categories;
  std::map<std::string, FilteredDistribution> distributions;
  Committee committee;
  ProberPool prober_pool;
};

namespace seed_tag {
inline constexpr std::uint64_t kCurriculum = 0x63757272;
inline constexpr std::uint64_t kTask = 0x7461736b;
inline constexpr std::uint64_t kEpisode = 0x65706973;
inline constexpr std::uint64_t kVerify = 0x76657269;
inline constexpr std::uint64_t kProbe = 0x70726f62;
inline constexpr std::uint64_t kBc = 0x62632020;
inline constexpr std::uint64_t kSample = 0x73616d70;
}  // namespace seed_tag

inline Committee make_committee(const CommitteeSettings& s, const TransportFactory& transports) {
  Committee c;
  if (!s.endpoint.empty()) {
    require(static_cast<bool>(transports), ErrorCode::ConfigInvalid, "no transport available for the committee endpoint");
    for (std::size_t i = 0; i < s.models.size(); ++i)
      c.push_back(std::make_shared<ChatVerifier>("verifier-" + std::to_string(i + 1) + ":" + s.models[i],
                                                 ChatSettings{s.models[i], 0.0, kBackendTokenBudget},
                                                 transports(s.endpoint)));
    return c;
  }
  for (std::size_t i = 0; i < s.personas.size(); ++i) {
    const auto& p = s.personas[i];
    c.push_back(std::make_shared<SyntheticVerifier>(
        "verifier-" + std::to_string(i + 1) + ":" + std::string(to_string(p.kind)), Persona{p.kind, p.p_flip}));
  }
  return c;
}

inline ProberPool make_prober_pool(const ProberSettings& s, const TransportFactory& transports) {
  ProberPool pool;
  if (!s.endpoint.empty()) {
    require(static_cast<bool>(transports), ErrorCode::ConfigInvalid, "no transport available for the prober endpoint");
    for (const auto& m : s.models)
      pool.probers.push_back(std::make_shared<ChatProber>("prober:" + m, ChatSettings{m, s.temperature, kBackendTokenBudget},
                                                          transports(s.endpoint)));
  } else {
    for (auto b : s.breadths)
      pool.probers.push_back(std::make_shared<SyntheticProber>("prober-b" + std::to_string(b), b));
  }
  pool.mastery = s.initial_mastery;
  pool.alpha = s.alpha;
  pool.switch_threshold = s.switch_threshold;
  pool.batch_size = s.batch_size;
  pool.temperature = s.temperature;
  return pool;
}

inline Pipeline make_pipeline(RunConfig config, const TransportFactory& transports = {}) {
  config.validate();
  Pipeline p;
  const std::set<std::string> cats(config.library.categories.begin(), config.library.categories.end());
  p.library = load_library(config.library.path, cats, config.library.threshold);
  for (const auto& c : p.library.categories()) {
    try {
      p.distributions.emplace(c, build_filtered_distribution(p.library, {}, c));
      p.categories.push_back(c);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySupport) throw;
    }
  }
  require(!p.categories.empty(), ErrorCode::LibraryEmpty, "no category has a skill above the quality threshold");
  p.committee = make_committee(config.committee, transports);
  p.prober_pool = make_prober_pool(config.prober, transports);
  p.config = std::move(config);
  return p;
}

// ---------------------------------------------------------------------------
// Planning and episodes

struct GroupPlan {
  std::size_t group = 0;
  std::string category;
  std::vector<std::string> skills;
  SyntheticTask task;
};

inline std::string episode_id(std::size_t iteration, std::size_t group, std::size_t index) {
  std::ostringstream out;
  out << "it" << std::setw(4) << std::setfill('0') << iteration << "-g" << std::setw(2) << group << "-e"
      << std::setw(2) << index;
  return out.str();
}

/// Category and skill draws for one iteration, all derived from the master seed.
inline std::vector<GroupPlan> plan_iteration(const Pipeline& p, const ProficiencyState& proficiency,
                                             std::size_t iteration) {
  const auto& cfg = p.config;
  auto rng = make_rng(derive_seed(cfg.run.seed, seed_tag::kCurriculum, iteration));
  std::vector<GroupPlan> plans;
  for (std::size_t g = 0; g < cfg.run.groups_per_iteration; ++g) {
    GroupPlan plan;
    plan.group = g;
    plan.category = sample_category(proficiency, rng);
    const auto it = p.distributions.find(plan.category);
    require(it != p.distributions.end(), ErrorCode::UnknownCategory, "no skills for category '" + plan.category + "'");
    plan.skills = sample_skills(it->second, cfg.environment.skills_per_episode, rng);
    plan.task.modulus_pool = cfg.environment.modulus_pool;
    plan.task.target_skill_count = cfg.environment.skills_per_episode;
    plan.task.rng_seed = derive_seed(cfg.run.seed, seed_tag::kTask, iteration, g);
    plans.push_back(std::move(plan));
  }
  return plans;
}

struct EpisodeOutcome {
  Trajectory trajectory;
  std::vector<Decision> decisions;
  EpisodeMeta meta;
};

inline std::vector<Skill> resolve_skills(const Pipeline& p, const std::vector<std::string>& names) {
  std::vector<Skill> out;
  for (const auto& n : names) out.push_back(p.library.at(n));
  return out;
}

/// Generation, verification, probing and reward for one iteration's
/// episodes. `policy` null selects the scripted expert. Mastery is advanced
/// at every batch boundary, and probes after a boundary use the updated
/// prober.
struct CollectResult {
  std::vector<EpisodeOutcome> episodes;
  std::size_t prober_switches = 0;
};

inline CollectResult collect_iteration(const Pipeline& p, const std::vector<GroupPlan>& plans,
                                       const SoftmaxPolicy* policy, ProberCurriculum& prober, std::size_t iteration) {
  const auto& cfg = p.config;
  const auto env_cfg = cfg.env_config();
  const std::size_t per_group = cfg.run.group_size;
  const std::size_t n = plans.size() * per_group;
  CollectResult out;
  out.episodes.resize(n);

  // Rollout.
  parallel_for(n, cfg.run.workers, [&](std::size_t idx) {
    const auto& plan = plans[idx / per_group];
    const auto e = idx % per_group;
    const auto skills = resolve_skills(p, plan.skills);
    auto& ep = out.episodes[idx];
    if (policy) {
      auto r = run_policy_episode(*policy, plan.task, skills, env_cfg,
                                  derive_seed(cfg.run.seed, seed_tag::kEpisode, iteration, plan.group, e));
      ep.trajectory = std::move(r.trajectory);
      ep.decisions = std::move(r.decisions);
    } else {
      ep.trajectory = scripted_expert(plan.task, skills, env_cfg);
      ep.decisions = decisions_for(ep.trajectory, env_cfg.horizon);
    }
    ep.trajectory.episode_id = episode_id(iteration, plan.group, e);
    ep.trajectory.category = plan.category;
    ep.meta = EpisodeMeta{iteration, plan.group, plan.skills};
  });

  // Verification of every submitted problem before anything downstream.
  std::vector<VerifierVerdict> verdicts(n);
  parallel_for(n, cfg.run.workers, [&](std::size_t idx) {
    const auto& traj = out.episodes[idx].trajectory;
    if (!traj.submission) {
      verdicts[idx].reason = RejectionReason::NoSubmission;
      return;
    }
    verdicts[idx] = run_committee(p.committee, {generation_trace(traj), *traj.submission},
                                  derive_seed(cfg.run.seed, seed_tag::kVerify, iteration, idx));
  });

  // Probing of valid problems, chunked at mastery batch boundaries.
  std::vector<std::size_t> to_probe;
  for (std::size_t i = 0; i < n; ++i)
    if (verdicts[i].valid == 1) to_probe.push_back(i);
  std::vector<ProbeResult> probes(n);
  std::size_t done = 0;
  while (done < to_probe.size()) {
    const auto room = prober.pool().batch_size - prober.pending();
    const auto chunk = std::min(room, to_probe.size() - done);
    const auto pool = prober.pool();
    parallel_for(chunk, cfg.run.workers, [&](std::size_t j) {
      const auto idx = to_probe[done + j];
      probes[idx] = probe(*out.episodes[idx].trajectory.submission, pool, cfg.prober.k,
                          derive_seed(cfg.run.seed, seed_tag::kProbe, iteration, idx));
    });
    for (std::size_t j = 0; j < chunk; ++j)
      if (auto update = prober.observe(probes[to_probe[done + j]].pass_rate); update && update->switched)
        ++out.prober_switches;
    done += chunk;
  }

  // Rewards.
  for (std::size_t i = 0; i < n; ++i) {
    auto& traj = out.episodes[i].trajectory;
    if (traj.submission) traj = attach_rewards(std::move(traj), verdicts[i], probes[i], cfg.reward);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batches for the optimizer

inline Batch to_batch(const std::vector<EpisodeOutcome>& episodes) {
  Batch batch;
  for (const auto& ep : episodes) {
    EpisodeSpec spec;
    spec.group = ep.meta.group;
    spec.terminal_reward = reward_breakdown(ep.trajectory).terminal;
    for (const auto& s : ep.trajectory.steps)
      spec.steps.push_back({s.observation.stage, s.process_reward, s.action.tokens.size()});
    batch.push_back(std::move(spec));
  }
  return batch;
}

inline Decisions to_decisions(const std::vector<EpisodeOutcome>& episodes) {
  Decisions d;
  for (const auto& ep : episodes) d.push_back(ep.decisions);
  return d;
}

struct UpdateStats {
  std::vector<double> losses;
  MgpoDiagnostics diagnostics;
};

/// Several optimizer epochs on one batch; pi_old is the rollout policy.
inline UpdateStats policy_update(SoftmaxPolicy& policy, const SoftmaxPolicy& reference, Adam& adam,
                                 const std::vector<EpisodeOutcome>& episodes, const OptimizerSettings& opt) {
  UpdateStats stats;
  const auto batch = to_batch(episodes);
  const auto decisions = to_decisions(episodes);
  PolicyEval eval;
  eval.old = token_log_probs(policy, decisions, batch);
  eval.ref = token_log_probs(reference, decisions, batch);
  adam.lr = opt.learning_rate;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    eval.theta = token_log_probs(policy, decisions, batch);
    LossResult result;
    if (opt.algorithm == Algorithm::Mgpo) {
      auto r = mgpo_loss(batch, eval, opt.mgpo);
      stats.diagnostics = r.diagnostics;
      result = std::move(r);
    } else {
      result = grpo_loss(batch, eval, opt.clip_epsilon, opt.kl_beta, opt.mgpo.sigma_floor);
    }
    stats.losses.push_back(result.loss);
    adam.step(policy.params(), param_gradient(policy, decisions, result.token_grad));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Behavioral cloning

struct BcResult {
  SoftmaxPolicy policy;
  std::size_t demonstrations = 0;
  std::vector<double> losses;
};

/// Scripted-expert demonstrations over uniformly drawn compositions; only
/// verifier-valid demonstrations are kept.
inline std::vector<EpisodeOutcome> expert_demonstrations(const Pipeline& p) {
  const auto& cfg = p.config;
  auto rng = make_rng(derive_seed(cfg.run.seed, seed_tag::kBc));
  const auto uniform = ProficiencyState::uniform(p.categories, cfg.curriculum.initial, cfg.curriculum.alpha,
                                                 cfg.curriculum.epsilon);
  const auto env_cfg = cfg.env_config();
  std::vector<EpisodeOutcome> demos(cfg.bc.episodes);
  std::vector<std::vector<std::string>> skills(cfg.bc.episodes);
  std::vector<SyntheticTask> tasks(cfg.bc.episodes);
  std::vector<std::string> categories(cfg.bc.episodes);
  for (std::size_t i = 0; i < cfg.bc.episodes; ++i) {
    categories[i] = sample_category(uniform, rng);
    skills[i] = sample_skills(p.distributions.at(categories[i]), cfg.environment.skills_per_episode, rng);
    tasks[i].modulus_pool = cfg.environment.modulus_pool;
    tasks[i].rng_seed = derive_seed(cfg.run.seed, seed_tag::kBc, i);
  }
  parallel_for(cfg.bc.episodes, cfg.run.workers, [&](std::size_t i) {
    auto& d = demos[i];
    d.trajectory = scripted_expert(tasks[i], resolve_skills(p, skills[i]), env_cfg);
    d.trajectory.episode_id = "bc-" + std::to_string(i);
    d.trajectory.category = categories[i];
    d.decisions = decisions_for(d.trajectory, env_cfg.horizon);
    d.meta = EpisodeMeta{0, 0, skills[i]};
    const auto verdict = run_committee(p.committee, {generation_trace(d.trajectory), *d.trajectory.submission},
                                       derive_seed(cfg.run.seed, seed_tag::kBc, seed_tag::kVerify, i));
    d.trajectory = attach_rewards(std::move(d.trajectory), verdict, ProbeResult{}, cfg.reward);
  });
  std::erase_if(demos, [](const EpisodeOutcome& d) { return d.trajectory.terminal->verdict.valid != 1; });
  return demos;
}

inline BcResult train_bc(const Pipeline& p) {
  const auto& cfg = p.config;
  BcResult out;
  const auto demos = expert_demonstrations(p);
  require(!demos.empty(), ErrorCode::InvalidExpertTrajectory, "no verifier-valid demonstrations");
  out.demonstrations = demos.size();
  std::vector<Trajectory> trajs;
  for (const auto& d : demos) trajs.push_back(d.trajectory);
  const auto batch = to_batch(demos);
  const auto decisions = to_decisions(demos);
  Adam adam;
  adam.lr = cfg.bc.learning_rate;
  for (std::size_t epoch = 0; epoch < cfg.bc.epochs; ++epoch) {
    const auto result = sft_loss(trajs, token_log_probs(out.policy, decisions, batch));
    out.losses.push_back(result.loss);
    adam.step(out.policy.params(), param_gradient(out.policy, decisions, result.token_grad));
  }
  out.losses.push_back(sft_loss(trajs, token_log_probs(out.policy, decisions, batch)).loss);
  return out;
}

// ---------------------------------------------------------------------------
// Stage-3 loop

struct RunState {
  SoftmaxPolicy policy;
  SoftmaxPolicy reference;
  Adam optimizer;
  ProficiencyState proficiency;
  ProberCurriculum prober{ProberPool{}};
  std::size_t iteration = 0;
};

inline RunState initial_state(const Pipeline& p, const SoftmaxPolicy& bc_policy) {
  const auto& cfg = p.config;
  return RunState{bc_policy,
                  bc_policy,
                  Adam{},
                  ProficiencyState::uniform(p.categories, cfg.curriculum.initial, cfg.curriculum.alpha,
                                            cfg.curriculum.epsilon),
                  ProberCurriculum(p.prober_pool),
                  0};
}

inline nlohmann::json state_to_json(const RunState& s) {
  const auto& pool = s.prober.pool();
  return {{"iteration", s.iteration},
          {"policy", s.policy.to_json()},
          {"reference", s.reference.to_json()},
          {"optimizer", s.optimizer.to_json()},
          {"proficiency", s.proficiency.proficiency},
          {"prober",
           {{"active_index", pool.active_index},
            {"mastery", pool.mastery},
            {"mastery_initialized", pool.mastery_initialized},
            {"pending", s.prober.pending_values()},
            {"switches", s.prober.switches()},
            {"batches", s.prober.batches()}}}};
}

inline RunState state_from_json(const Pipeline& p, const nlohmann::json& j) {
  RunState s = initial_state(p, SoftmaxPolicy::from_json(j.at("reference")));
  s.iteration = j.at("iteration").get<std::size_t>();
  s.policy = SoftmaxPolicy::from_json(j.at("policy"));
  s.optimizer = Adam::from_json(j.at("optimizer"));
  s.proficiency.proficiency = j.at("proficiency").get<std::map<std::string, double>>();
  const auto& pr = j.at("prober");
  s.prober.restore(pr.at("active_index").get<std::size_t>(), pr.at("mastery").get<double>(),
                   pr.at("mastery_initialized").get<bool>(), pr.at("pending").get<std::vector<double>>(),
                   pr.at("switches").get<std::size_t>(), pr.at("batches").get<std::size_t>());
  return s;
}

struct IterationMetrics {
  std::size_t iteration = 0;
  std::size_t episodes = 0;
  std::size_t valid = 0;
  std::size_t truncated = 0;
  double proposing_accuracy = 0.0;
  double mean_terminal_reward = 0.0;
  double mean_pass_rate = 0.0;
  std::map<std::string, double> proficiency;
  std::map<std::string, std::size_t> category_draws;
  std::size_t prober_switches = 0;
  std::size_t active_prober = 0;
  double prober_mastery = 0.0;
  std::vector<double> losses;
  MgpoDiagnostics diagnostics;

  nlohmann::json to_json() const {
    return {{"iteration", iteration},
            {"episodes", episodes},
            {"valid", valid},
            {"truncated", truncated},
            {"proposing_accuracy", proposing_accuracy},
            {"mean_terminal_reward", mean_terminal_reward},
            {"mean_pass_rate", mean_pass_rate},
            {"proficiency", proficiency},
            {"category_draws", category_draws},
            {"prober_switches", prober_switches},
            {"active_prober", active_prober},
            {"prober_mastery", prober_mastery},
            {"losses", losses},
            {"mean_abs_gated_weight", diagnostics.mean_abs_gated_weight},
            {"max_abs_stage_weight_sum", diagnostics.max_abs_stage_weight_sum},
            {"gate_histogram", diagnostics.gate_histogram}};
  }
};

/// Per-iteration statistics over generated episodes (no update fields).
inline IterationMetrics summarize(const std::vector<EpisodeOutcome>& episodes, std::size_t iteration) {
  IterationMetrics m;
  m.iteration = iteration;
  m.episodes = episodes.size();
  std::size_t probed = 0;
  for (const auto& ep : episodes) {
    const auto& t = ep.trajectory;
    if (t.truncated()) ++m.truncated;
    if (t.terminal && t.terminal->verdict.valid == 1) {
      ++m.valid;
      m.mean_pass_rate += t.terminal->probe.pass_rate;
      ++probed;
    }
    m.mean_terminal_reward += reward_breakdown(t).terminal;
  }
  if (m.episodes > 0) {
    m.proposing_accuracy = static_cast<double>(m.valid) / static_cast<double>(m.episodes);
    m.mean_terminal_reward /= static_cast<double>(m.episodes);
  }
  if (probed > 0) m.mean_pass_rate /= static_cast<double>(probed);
  return m;
}

/// One curriculum iteration. Order: sample, rollout, verify, probe, reward,
/// policy update, proficiency update.
inline IterationMetrics stage3_iteration(const Pipeline& p, RunState& state,
                                         std::vector<EpisodeOutcome>* episodes_out = nullptr) {
  const auto iteration = state.iteration;
  const auto plans = plan_iteration(p, state.proficiency, iteration);
  auto collected = collect_iteration(p, plans, &state.policy, state.prober, iteration);
  auto metrics = summarize(collected.episodes, iteration);
  for (const auto& plan : plans) ++metrics.category_draws[plan.category];

  const auto stats = policy_update(state.policy, state.reference, state.optimizer, collected.episodes,
                                   p.config.optimizer);
  metrics.losses = stats.losses;
  metrics.diagnostics = stats.diagnostics;

  std::vector<Trajectory> trajs;
  for (const auto& ep : collected.episodes) trajs.push_back(ep.trajectory);
  state.proficiency = update_proficiency(state.proficiency, success_rates_from_batch(trajs, p.config.curriculum.metric));

  metrics.proficiency = state.proficiency.proficiency;
  metrics.prober_switches = collected.prober_switches;
  metrics.active_prober = state.prober.pool().active_index;
  metrics.prober_mastery = state.prober.pool().mastery;
  ++state.iteration;
  if (episodes_out) *episodes_out = std::move(collected.episodes);
  return metrics;
}

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path trajectories() const { return dir / "trajectories.jsonl"; }
  std::filesystem::path metrics() const { return dir / "metrics.jsonl"; }
  std::filesystem::path checkpoint() const { return dir / "checkpoint.json"; }
  std::filesystem::path policy() const { return dir / "policy.json"; }
  std::filesystem::path report_text() const { return dir / "report.txt"; }
  std::filesystem::path report_series() const { return dir / "report.json"; }
};

/// Runs iterations until `iterations` have completed. With an output
/// directory, trajectories and metrics are appended after each iteration and
/// a checkpoint is written; `resume` continues from that checkpoint,
/// discarding records of any iteration it does not cover.
inline std::vector<IterationMetrics> run_stage3(const Pipeline& p, RunState state,
                                                const std::optional<std::filesystem::path>& output_dir = std::nullopt,
                                                bool resume = false, RunState* final_state = nullptr) {
  std::optional<RunPaths> paths;
  std::unique_ptr<JsonlWriter> traj_writer, metrics_writer;
  if (output_dir) {
    paths = RunPaths{*output_dir};
    std::filesystem::create_directories(paths->dir);
    if (resume && std::filesystem::exists(paths->checkpoint())) {
      state = state_from_json(p, nlohmann::json::parse(read_text_file(paths->checkpoint())));
      truncate_jsonl_to_iteration(paths->trajectories(), state.iteration);
      truncate_jsonl_to_iteration(paths->metrics(), state.iteration);
    } else {
      std::filesystem::remove(paths->trajectories());
      std::filesystem::remove(paths->metrics());
      std::filesystem::remove(paths->checkpoint());
    }
    traj_writer = std::make_unique<JsonlWriter>(paths->trajectories());
    metrics_writer = std::make_unique<JsonlWriter>(paths->metrics());
  }
  std::vector<IterationMetrics> all;
  while (state.iteration < p.config.run.iterations) {
    std::vector<EpisodeOutcome> episodes;
    auto m = stage3_iteration(p, state, &episodes);
    if (paths) {
      for (const auto& ep : episodes) traj_writer->append(trajectory_to_json(ep.trajectory, ep.meta));
      metrics_writer->append(m.to_json());
      write_text_atomic(paths->checkpoint(), state_to_json(state).dump());
    }
    all.push_back(std::move(m));
  }
  if (paths) write_text_atomic(paths->policy(), state.policy.to_json().dump(2) + "\n");
  if (final_state) *final_state = std::move(state);
  return all;
}

// ---------------------------------------------------------------------------
// Reports

inline double mean_accuracy(const std::vector<IterationMetrics>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : m) s += x.proposing_accuracy;
  return s / static_cast<double>(m.size());
}

inline nlohmann::json report_series(const std::vector<nlohmann::json>& metrics) {
  nlohmann::json series = {{"iteration", nlohmann::json::array()},
                           {"proposing_accuracy", nlohmann::json::array()},
                           {"mean_terminal_reward", nlohmann::json::array()},
                           {"prober_switches", nlohmann::json::array()},
                           {"loss", nlohmann::json::array()},
                           {"proficiency", nlohmann::json::object()}};
  for (const auto& m : metrics) {
    series["iteration"].push_back(m.at("iteration"));
    series["proposing_accuracy"].push_back(m.at("proposing_accuracy"));
    series["mean_terminal_reward"].push_back(m.at("mean_terminal_reward"));
    series["prober_switches"].push_back(m.at("prober_switches"));
    const auto& losses = m.at("losses");
    series["loss"].push_back(losses.empty() ? nlohmann::json(nullptr) : losses.back());
    for (const auto& [c, v] : m.at("proficiency").items()) series["proficiency"][c].push_back(v);
  }
  return series;
}

inline std::string report_table(const std::vector<nlohmann::json>& metrics) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "iteration  proposing_acc  mean_reward  switches  loss\n";
  for (const auto& m : metrics) {
    const auto& losses = m.at("losses");
    out << std::setw(9) << m.at("iteration").get<std::size_t>() << "  " << std::setw(13)
        << m.at("proposing_accuracy").get<double>() << "  " << std::setw(11)
        << m.at("mean_terminal_reward").get<double>() << "  " << std::setw(8)
        << m.at("prober_switches").get<std::size_t>() << "  ";
    if (losses.empty()) out << "-";
    else out << losses.back().get<double>();
    out << "\n";
  }
  if (metrics.empty()) out << "(no iterations)\n";
  return out.str();
}

/// Writes report.txt and report.json from the run's metrics file.
inline std::string write_report(const std::filesystem::path& dir) {
  const RunPaths paths{dir};
  const auto metrics = read_jsonl(paths.metrics());
  const auto table = report_table(metrics);
  write_text_atomic(paths.report_text(), table);
  write_text_atomic(paths.report_series(), report_series(metrics).dump(2) + "\n");
  return table;
}

// ---------------------------------------------------------------------------
// Ablation grid

struct AblationRow {
  GateMode gate = GateMode::Asymmetric;
  double tau_pos = 1.0;
  double tau_neg = 1.05;
  double omega = 0.5;
  double mean_accuracy = 0.0;
  double final_accuracy = 0.0;
  double mean_reward = 0.0;

  nlohmann::json to_json() const {
    return {{"gate", std::string(to_string(gate))}, {"tau_pos", tau_pos},           {"tau_neg", tau_neg},
            {"omega", omega},                       {"mean_accuracy", mean_accuracy}, {"final_accuracy", final_accuracy},
            {"mean_reward", mean_reward}};
  }
};

/// One row per (gate, tau pair, omega), each run from the same BC policy.
inline std::vector<AblationRow> run_ablation(const Pipeline& base, const SoftmaxPolicy& bc_policy) {
  std::vector<AblationRow> rows;
  for (auto gate : base.config.ablate.gates) {
    for (const auto& [tp, tn] : base.config.ablate.tau_pairs) {
      for (double omega : base.config.ablate.omegas) {
        Pipeline p = base;
        p.config.run.iterations = base.config.ablate.iterations;
        p.config.optimizer.algorithm = Algorithm::Mgpo;
        p.config.optimizer.mgpo.gate = gate;
        p.config.optimizer.mgpo.tau_pos = tp;
        p.config.optimizer.mgpo.tau_neg = tn;
        p.config.optimizer.mgpo.omega = omega;
        const auto metrics = run_stage3(p, initial_state(p, bc_policy));
        AblationRow row{gate, tp, tn, omega};
        row.mean_accuracy = mean_accuracy(metrics);
        row.final_accuracy = metrics.empty() ? 0.0 : metrics.back().proposing_accuracy;
        for (const auto& m : metrics) row.mean_reward += m.mean_terminal_reward;
        if (!metrics.empty()) row.mean_reward /= static_cast<double>(metrics.size());
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "gate        tau_pos  tau_neg  omega   mean_acc  final_acc  mean_reward\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << to_string(r.gate) << std::right << "  " << std::setw(7) << r.tau_pos << "  "
        << std::setw(7) << r.tau_neg << "  " << std::setw(5) << r.omega << "  " << std::setw(8) << r.mean_accuracy
        << "  " << std::setw(9) << r.final_accuracy << "  " << std::setw(11) << r.mean_reward << "\n";
  }
  return out.str();
}

}  // namespace agentic
