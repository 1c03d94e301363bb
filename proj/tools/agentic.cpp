// Command-line driver for the synthesis pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 backend error,
// 4 library error, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "agentic/http_transport.hpp"
#include "agentic/pipeline.hpp"

namespace {

using namespace agentic;
namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> iterations;
  std::optional<std::string> library;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration");
  cmd->add_option("--seed", o.seed, "master seed (overrides config and AGENTIC_MASTER_SEED)");
  cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
  cmd->add_option("--iterations", o.iterations, "iteration count");
  cmd->add_option("--library", o.library, "skill library directory");
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  apply_env_overrides(c);
  if (o.seed) c.run.seed = *o.seed;
  if (o.output_dir) c.run.output_dir = *o.output_dir;
  if (o.iterations) c.run.iterations = *o.iterations;
  if (o.library) c.library.path = *o.library;
  return c;
}

Pipeline build(const RunConfig& c) {
  return make_pipeline(c, [](const std::string& endpoint) { return make_http_transport(endpoint); });
}

SoftmaxPolicy load_policy(const std::string& path) {
  try {
    return SoftmaxPolicy::from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigInvalid, "cannot read policy " + path + ": " + e.what());
  }
}

SoftmaxPolicy bc_policy_for(const Pipeline& p, const std::string& path) {
  if (!path.empty()) return load_policy(path);
  auto bc = train_bc(p);
  write_text_atomic(fs::path(p.config.run.output_dir) / "bc_policy.json", bc.policy.to_json().dump(2) + "\n");
  return bc.policy;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid: return 2;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ProberBackendUnavailable: return 3;
    case ErrorCode::LibraryEmpty:
    case ErrorCode::MissingField:
    case ErrorCode::MalformedFrontmatter:
    case ErrorCode::DifficultyOutOfRange:
    case ErrorCode::DuplicateSkill:
    case ErrorCode::UnknownCategory:
    case ErrorCode::EmptySupport: return 4;
    default: return 1;
  }
}

int cmd_skills_validate(const CommonOptions& o) {
  const auto c = resolve_config(o);
  const std::set<std::string> cats(c.library.categories.begin(), c.library.categories.end());
  const auto scan = scan_library(c.library.path, cats);
  for (const auto& v : scan.violations) std::cout << "violation  " << v.package << ": " << v.message << "\n";
  std::cout << scan.skills.size() << " skills, " << scan.violations.size() << " violations\n";
  if (!scan.violations.empty()) return 4;
  if (scan.skills.empty()) {
    std::cerr << "error: no skill packages under " << c.library.path << "\n";
    return 4;
  }
  const auto lib = make_library(scan.skills, cats, c.library.threshold);
  for (const auto& cat : lib.categories()) {
    std::size_t kept = 0;
    for (const auto& n : lib.names_in(cat))
      if (lib.at(n).quality_score >= lib.threshold()) ++kept;
    std::cout << "  " << cat << ": " << lib.names_in(cat).size() << " skills, " << kept << " above threshold\n";
  }
  return 0;
}

int cmd_sample(const CommonOptions& o, std::size_t count) {
  const auto c = resolve_config(o);
  const auto p = build(c);
  const auto prof = ProficiencyState::uniform(p.categories, c.curriculum.initial, c.curriculum.alpha, c.curriculum.epsilon);
  auto rng = make_rng(derive_seed(c.run.seed, seed_tag::kSample));
  for (std::size_t i = 0; i < count; ++i) {
    const auto cat = sample_category(prof, rng);
    const auto names = sample_skills(p.distributions.at(cat), c.environment.skills_per_episode, rng);
    std::cout << "=== composition " << (i + 1) << " (" << cat << ")\n" << compose_constraints(resolve_skills(p, names)) << "\n";
  }
  return 0;
}

int cmd_rollout(const CommonOptions& o, const std::string& policy_path) {
  const auto c = resolve_config(o);
  const auto p = build(c);
  std::optional<SoftmaxPolicy> policy;
  if (!policy_path.empty()) policy = load_policy(policy_path);
  const auto prof = ProficiencyState::uniform(p.categories, c.curriculum.initial, c.curriculum.alpha, c.curriculum.epsilon);
  ProberCurriculum prober(p.prober_pool);
  const auto path = fs::path(c.run.output_dir) / "rollout.jsonl";
  fs::remove(path);
  JsonlWriter writer(path);
  const auto plans = plan_iteration(p, prof, 0);
  const auto collected = collect_iteration(p, plans, policy ? &*policy : nullptr, prober, 0);
  for (const auto& ep : collected.episodes) writer.append(trajectory_to_json(ep.trajectory, ep.meta));
  const auto m = summarize(collected.episodes, 0);
  std::cout << m.episodes << " episodes, proposing accuracy " << m.proposing_accuracy << ", mean terminal reward "
            << m.mean_terminal_reward << "\nwrote " << path.string() << "\n";
  return 0;
}

int cmd_train_bc(const CommonOptions& o) {
  const auto c = resolve_config(o);
  const auto p = build(c);
  const auto bc = train_bc(p);
  const auto path = fs::path(c.run.output_dir) / "bc_policy.json";
  write_text_atomic(path, bc.policy.to_json().dump(2) + "\n");
  std::cout << bc.demonstrations << " demonstrations; loss " << bc.losses.front() << " -> " << bc.losses.back()
            << "\nwrote " << path.string() << "\n";
  return 0;
}

int cmd_train_mgpo(const CommonOptions& o, const std::string& bc_path, bool resume, const std::string& algorithm) {
  auto c = resolve_config(o);
  if (!algorithm.empty()) c.optimizer.algorithm = parse_algorithm(algorithm);
  const auto p = build(c);
  const fs::path dir = c.run.output_dir;
  fs::create_directories(dir);
  write_text_atomic(dir / "config.json", config_to_json(c).dump(2) + "\n");
  const bool have_checkpoint = resume && fs::exists(RunPaths{dir}.checkpoint());
  const auto bc = have_checkpoint ? SoftmaxPolicy{} : bc_policy_for(p, bc_path);
  run_stage3(p, initial_state(p, bc), dir, resume);
  std::cout << write_report(dir);
  return 0;
}

int cmd_ablate(const CommonOptions& o, const std::string& bc_path) {
  const auto c = resolve_config(o);
  const auto p = build(c);
  const auto rows = run_ablation(p, bc_policy_for(p, bc_path));
  const fs::path dir = c.run.output_dir;
  fs::remove(dir / "ablation.jsonl");
  JsonlWriter writer(dir / "ablation.jsonl");
  for (const auto& r : rows) writer.append(r.to_json());
  const auto table = ablation_table(rows);
  write_text_atomic(dir / "ablation.txt", table);
  std::cout << table << rows.size() << " configurations\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  if (!fs::is_directory(run_dir)) fail(ErrorCode::ConfigInvalid, "run directory not found: " + run_dir);
  std::cout << write_report(run_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic problem-synthesis pipeline"};
  app.require_subcommand(1);

  CommonOptions common;
  std::size_t sample_count = 3;
  std::string policy_path, bc_path, algorithm, run_dir;
  bool resume = false;

  auto* validate = app.add_subcommand("skills-validate", "parse the skill library and report violations");
  add_common(validate, common);
  auto* sample = app.add_subcommand("sample", "draw categories and skills and print compositions");
  add_common(sample, common);
  sample->add_option("-n,--count", sample_count, "number of compositions");
  auto* rollout = app.add_subcommand("rollout", "run one iteration of episodes and write trajectory records");
  add_common(rollout, common);
  rollout->add_option("--policy", policy_path, "policy JSON (default: scripted expert)");
  auto* bc = app.add_subcommand("train-bc", "behavioral cloning on scripted-expert demonstrations");
  add_common(bc, common);
  auto* train = app.add_subcommand("train-mgpo", "curriculum-driven policy optimization loop");
  add_common(train, common);
  train->add_option("--bc-policy", bc_path, "initial policy JSON (default: train BC first)");
  train->add_flag("--resume", resume, "continue from the checkpoint in the output directory");
  train->add_option("--algorithm", algorithm, "mgpo or grpo")->check(CLI::IsMember({"mgpo", "grpo"}));
  auto* ablate = app.add_subcommand("ablate", "gate, temperature and fusion-weight grid");
  add_common(ablate, common);
  ablate->add_option("--bc-policy", bc_path, "initial policy JSON (default: train BC first)");
  auto* report = app.add_subcommand("report", "tables and series from a run's metrics");
  report->add_option("run_dir", run_dir, "run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_skills_validate(common);
    if (*sample) return cmd_sample(common, sample_count);
    if (*rollout) return cmd_rollout(common, policy_path);
    if (*bc) return cmd_train_bc(common);
    if (*train) return cmd_train_mgpo(common, bc_path, resume, algorithm);
    if (*ablate) return cmd_ablate(common, bc_path);
    if (*report) return cmd_report(run_dir);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
