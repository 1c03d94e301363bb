#pragma once

// Run configuration: one JSON document with nested sections. Every field is
// optional in the file; absent fields keep their defaults.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentic/curriculum.hpp"
#include "agentic/environment.hpp"
#include "agentic/errors.hpp"
#include "agentic/mgpo.hpp"
#include "agentic/reward.hpp"
#include "agentic/verification.hpp"

namespace agentic {

enum class Algorithm { Mgpo, Grpo };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::Mgpo ? "mgpo" : "grpo"; }

inline Algorithm parse_algorithm(std::string_view text) {
  if (text == "mgpo") return Algorithm::Mgpo;
  if (text == "grpo") return Algorithm::Grpo;
  fail(ErrorCode::ConfigInvalid, "unknown algorithm '" + std::string(text) + "'");
}

struct LibrarySettings {
  std::string path = "data/skills";
  double threshold = kDefaultQualityThreshold;
  /// Empty: categories are whatever the packages declare.
  std::vector<std::string> categories;
};

struct EnvironmentSettings {
  std::size_t horizon = 32;
  std::size_t skills_per_episode = 3;
  std::vector<std::int64_t> modulus_pool{3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  double r_exec = 0.1;
  double r_think = 0.05;
};

struct PersonaSettings {
  PersonaKind kind = PersonaKind::Sound;
  double p_flip = 0.0;
};

struct CommitteeSettings {
  std::vector<PersonaSettings> personas{{PersonaKind::Sound, 0.0},
                                        {PersonaKind::Sound, 0.0},
                                        {PersonaKind::Noisy, 0.05}};
  /// Chat-completion endpoint; when set, replaces the synthetic personas.
  std::string endpoint;
  std::vector<std::string> models;
};

struct ProberSettings {
  int k = 16;
  std::size_t batch_size = 500;
  double switch_threshold = 0.30;
  double alpha = 0.2;
  double initial_mastery = 0.5;
  double temperature = kReferenceProberTemperature;
  /// Synthetic prober search budgets, weak to strong.
  std::vector<std::int64_t> breadths{2, 8, 32, 128};
  std::string endpoint;
  std::vector<std::string> models;
};

struct CurriculumSettings {
  double alpha = 0.2;
  double epsilon = 0.05;
  double initial = 0.5;
  SuccessMetric metric = SuccessMetric::Validity;
};

struct OptimizerSettings {
  Algorithm algorithm = Algorithm::Mgpo;
  MGPOConfig mgpo;
  double clip_epsilon = 0.2;
  double kl_beta = 0.05;
  double learning_rate = 0.05;
  std::size_t epochs = 4;
};

struct BcSettings {
  std::size_t episodes = 64;
  std::size_t epochs = 6;
  double learning_rate = 0.05;
};

struct RunSettings {
  std::uint64_t seed = 0;
  std::size_t iterations = 50;
  std::size_t groups_per_iteration = 8;
  std::size_t group_size = 8;
  std::size_t workers = 4;
  std::string output_dir = "runs/default";
};

struct AblateSettings {
  std::size_t iterations = 10;
  std::vector<GateMode> gates{GateMode::Asymmetric, GateMode::Symmetric, GateMode::None};
  std::vector<std::pair<double, double>> tau_pairs{{0.4, 0.6}, {0.6, 0.8}, {0.8, 0.9},
                                                   {1.0, 1.05}, {1.2, 1.4}, {1.6, 1.9}};
  std::vector<double> omegas{0.0, 0.2, 0.5, 1.0, 1.5};
};

struct RunConfig {
  LibrarySettings library;
  EnvironmentSettings environment;
  CommitteeSettings committee;
  ProberSettings prober;
  CurriculumSettings curriculum;
  RewardConfig reward;
  OptimizerSettings optimizer;
  BcSettings bc;
  RunSettings run;
  AblateSettings ablate;

  EnvConfig env_config() const {
    EnvConfig c;
    c.horizon = environment.horizon;
    c.r_exec = environment.r_exec;
    c.r_think = environment.r_think;
    return c;
  }

  /// Throws ConfigInvalid naming the first violated field.
  void validate(bool check_paths = true) const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) fail(ErrorCode::ConfigInvalid, what);
    };
    if (check_paths) check(std::filesystem::is_directory(library.path), "library.path does not exist: " + library.path);
    check(library.threshold >= 0.0, "library.threshold must be >= 0");
    check(environment.horizon >= 2, "environment.horizon must be >= 2");
    check(environment.skills_per_episode >= 1, "environment.skills_per_episode must be >= 1");
    check(!environment.modulus_pool.empty(), "environment.modulus_pool is empty");
    for (auto m : environment.modulus_pool) check(m >= 2, "environment.modulus_pool entries must be >= 2");
    check(environment.r_exec >= 0.0 && environment.r_think >= 0.0, "process rewards must be >= 0");
    if (committee.endpoint.empty()) {
      check(committee.personas.size() == kCommitteeSize, "committee.personas must list exactly 3 personas");
      for (const auto& p : committee.personas) check(p.p_flip >= 0.0 && p.p_flip <= 1.0, "p_flip outside [0,1]");
    } else {
      check(committee.models.size() == kCommitteeSize, "committee.models must list exactly 3 models");
    }
    check(prober.k >= 1, "prober.k must be >= 1");
    check(prober.batch_size >= 1, "prober.batch_size must be >= 1");
    check(prober.alpha > 0.0 && prober.alpha < 1.0, "prober.alpha must lie in (0,1)");
    check(prober.temperature > 0.0, "prober.temperature must be > 0");
    if (prober.endpoint.empty()) {
      check(!prober.breadths.empty(), "prober.breadths is empty");
      for (auto b : prober.breadths) check(b >= 1, "prober.breadths entries must be >= 1");
    } else {
      check(!prober.models.empty(), "prober.models is empty");
    }
    check(curriculum.alpha > 0.0 && curriculum.alpha < 1.0, "curriculum.alpha must lie in (0,1)");
    check(curriculum.epsilon > 0.0, "curriculum.epsilon must be > 0");
    check(curriculum.initial >= 0.0 && curriculum.initial <= 1.0, "curriculum.initial outside [0,1]");
    check(reward.base > 0.0 && reward.lambda > 0.0, "reward.base and reward.lambda must be > 0");
    try {
      optimizer.mgpo.validate();
    } catch (const Error& e) {
      fail(ErrorCode::ConfigInvalid, std::string("optimizer: ") + e.what());
    }
    check(optimizer.clip_epsilon > 0.0, "optimizer.clip_epsilon must be > 0");
    check(optimizer.kl_beta >= 0.0, "optimizer.kl_beta must be >= 0");
    check(optimizer.learning_rate > 0.0, "optimizer.learning_rate must be > 0");
    check(bc.learning_rate > 0.0, "bc.learning_rate must be > 0");
    check(run.group_size >= 2, "run.group_size must be >= 2");
    check(run.groups_per_iteration >= 1, "run.groups_per_iteration must be >= 1");
    check(run.workers >= 1, "run.workers must be >= 1");
    for (const auto& [p, n] : ablate.tau_pairs) check(p > 0.0 && n > p, "ablate.tau_pairs need 0 < tau_pos < tau_neg");
    for (double w : ablate.omegas) check(w >= 0.0, "ablate.omegas must be >= 0");
  }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("field '") + key + "': " + e.what());
  }
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  if (!j.contains(key)) return kEmpty;
  if (!j.at(key).is_object()) fail(ErrorCode::ConfigInvalid, std::string("section '") + key + "' must be an object");
  return j.at(key);
}

inline PersonaKind parse_persona_kind(const std::string& s) {
  for (auto k : {PersonaKind::Sound, PersonaKind::Noisy, PersonaKind::Abstaining})
    if (to_string(k) == s) return k;
  fail(ErrorCode::ConfigInvalid, "unknown persona kind '" + s + "'");
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read_field;
  using detail::section;
  if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "config must be a JSON object");
  RunConfig c;

  const auto& lib = section(j, "library");
  read_field(lib, "path", c.library.path);
  read_field(lib, "threshold", c.library.threshold);
  read_field(lib, "categories", c.library.categories);

  const auto& env = section(j, "environment");
  read_field(env, "horizon", c.environment.horizon);
  read_field(env, "skills_per_episode", c.environment.skills_per_episode);
  read_field(env, "modulus_pool", c.environment.modulus_pool);
  read_field(env, "r_exec", c.environment.r_exec);
  read_field(env, "r_think", c.environment.r_think);

  const auto& com = section(j, "committee");
  if (com.contains("personas")) {
    c.committee.personas.clear();
    for (const auto& p : com.at("personas")) {
      PersonaSettings ps;
      std::string kind = "sound";
      read_field(p, "kind", kind);
      ps.kind = detail::parse_persona_kind(kind);
      read_field(p, "p_flip", ps.p_flip);
      c.committee.personas.push_back(ps);
    }
  }
  read_field(com, "endpoint", c.committee.endpoint);
  read_field(com, "models", c.committee.models);

  const auto& pr = section(j, "prober");
  read_field(pr, "k", c.prober.k);
  read_field(pr, "batch_size", c.prober.batch_size);
  read_field(pr, "switch_threshold", c.prober.switch_threshold);
  read_field(pr, "alpha", c.prober.alpha);
  read_field(pr, "initial_mastery", c.prober.initial_mastery);
  read_field(pr, "temperature", c.prober.temperature);
  read_field(pr, "breadths", c.prober.breadths);
  read_field(pr, "endpoint", c.prober.endpoint);
  read_field(pr, "models", c.prober.models);

  const auto& cur = section(j, "curriculum");
  read_field(cur, "alpha", c.curriculum.alpha);
  read_field(cur, "epsilon", c.curriculum.epsilon);
  read_field(cur, "initial", c.curriculum.initial);
  if (cur.contains("metric")) {
    std::string m;
    read_field(cur, "metric", m);
    if (m == "validity") c.curriculum.metric = SuccessMetric::Validity;
    else if (m == "validity_and_difficulty") c.curriculum.metric = SuccessMetric::ValidityAndDifficulty;
    else fail(ErrorCode::ConfigInvalid, "unknown curriculum metric '" + m + "'");
  }

  const auto& rw = section(j, "reward");
  read_field(rw, "base", c.reward.base);
  read_field(rw, "lambda", c.reward.lambda);
  c.reward.r_exec = c.environment.r_exec;
  c.reward.r_think = c.environment.r_think;

  const auto& opt = section(j, "optimizer");
  if (opt.contains("algorithm")) c.optimizer.algorithm = parse_algorithm(opt.at("algorithm").get<std::string>());
  read_field(opt, "beta", c.optimizer.mgpo.beta);
  read_field(opt, "omega", c.optimizer.mgpo.omega);
  read_field(opt, "tau_pos", c.optimizer.mgpo.tau_pos);
  read_field(opt, "tau_neg", c.optimizer.mgpo.tau_neg);
  read_field(opt, "sigma_floor", c.optimizer.mgpo.sigma_floor);
  if (opt.contains("gate")) {
    try {
      c.optimizer.mgpo.gate = parse_gate_mode(opt.at("gate").get<std::string>());
    } catch (const Error& e) {
      fail(ErrorCode::ConfigInvalid, e.what());
    }
  }
  read_field(opt, "clip_epsilon", c.optimizer.clip_epsilon);
  read_field(opt, "kl_beta", c.optimizer.kl_beta);
  read_field(opt, "learning_rate", c.optimizer.learning_rate);
  read_field(opt, "epochs", c.optimizer.epochs);

  const auto& bc = section(j, "bc");
  read_field(bc, "episodes", c.bc.episodes);
  read_field(bc, "epochs", c.bc.epochs);
  read_field(bc, "learning_rate", c.bc.learning_rate);

  const auto& run = section(j, "run");
  read_field(run, "seed", c.run.seed);
  read_field(run, "iterations", c.run.iterations);
  read_field(run, "groups_per_iteration", c.run.groups_per_iteration);
  read_field(run, "group_size", c.run.group_size);
  read_field(run, "workers", c.run.workers);
  read_field(run, "output_dir", c.run.output_dir);
  c.optimizer.mgpo.group_size = c.run.group_size;

  const auto& ab = section(j, "ablate");
  read_field(ab, "iterations", c.ablate.iterations);
  if (ab.contains("gates")) {
    c.ablate.gates.clear();
    for (const auto& g : ab.at("gates")) {
      try {
        c.ablate.gates.push_back(parse_gate_mode(g.get<std::string>()));
      } catch (const Error& e) {
        fail(ErrorCode::ConfigInvalid, e.what());
      }
    }
  }
  read_field(ab, "tau_pairs", c.ablate.tau_pairs);
  read_field(ab, "omegas", c.ablate.omegas);
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json personas = nlohmann::json::array();
  for (const auto& p : c.committee.personas)
    personas.push_back({{"kind", std::string(to_string(p.kind))}, {"p_flip", p.p_flip}});
  std::vector<std::string> gates;
  for (auto g : c.ablate.gates) gates.emplace_back(to_string(g));
  return {
      {"library", {{"path", c.library.path}, {"threshold", c.library.threshold}, {"categories", c.library.categories}}},
      {"environment",
       {{"horizon", c.environment.horizon},
        {"skills_per_episode", c.environment.skills_per_episode},
        {"modulus_pool", c.environment.modulus_pool},
        {"r_exec", c.environment.r_exec},
        {"r_think", c.environment.r_think}}},
      {"committee", {{"personas", personas}, {"endpoint", c.committee.endpoint}, {"models", c.committee.models}}},
      {"prober",
       {{"k", c.prober.k},
        {"batch_size", c.prober.batch_size},
        {"switch_threshold", c.prober.switch_threshold},
        {"alpha", c.prober.alpha},
        {"initial_mastery", c.prober.initial_mastery},
        {"temperature", c.prober.temperature},
        {"breadths", c.prober.breadths},
        {"endpoint", c.prober.endpoint},
        {"models", c.prober.models}}},
      {"curriculum",
       {{"alpha", c.curriculum.alpha},
        {"epsilon", c.curriculum.epsilon},
        {"initial", c.curriculum.initial},
        {"metric", c.curriculum.metric == SuccessMetric::Validity ? "validity" : "validity_and_difficulty"}}},
      {"reward", {{"base", c.reward.base}, {"lambda", c.reward.lambda}}},
      {"optimizer",
       {{"algorithm", std::string(to_string(c.optimizer.algorithm))},
        {"beta", c.optimizer.mgpo.beta},
        {"omega", c.optimizer.mgpo.omega},
        {"tau_pos", c.optimizer.mgpo.tau_pos},
        {"tau_neg", c.optimizer.mgpo.tau_neg},
        {"sigma_floor", c.optimizer.mgpo.sigma_floor},
        {"gate", std::string(to_string(c.optimizer.mgpo.gate))},
        {"clip_epsilon", c.optimizer.clip_epsilon},
        {"kl_beta", c.optimizer.kl_beta},
        {"learning_rate", c.optimizer.learning_rate},
        {"epochs", c.optimizer.epochs}}},
      {"bc", {{"episodes", c.bc.episodes}, {"epochs", c.bc.epochs}, {"learning_rate", c.bc.learning_rate}}},
      {"run",
       {{"seed", c.run.seed},
        {"iterations", c.run.iterations},
        {"groups_per_iteration", c.run.groups_per_iteration},
        {"group_size", c.run.group_size},
        {"workers", c.run.workers},
        {"output_dir", c.run.output_dir}}},
      {"ablate", {{"iterations", c.ablate.iterations}, {"gates", gates}, {"tau_pairs", c.ablate.tau_pairs},
                  {"omegas", c.ablate.omegas}}},
  };
}

/// Environment overrides: AGENTIC_MASTER_SEED, AGENTIC_VERIFIER_ENDPOINT,
/// AGENTIC_PROBER_ENDPOINT.
inline void apply_env_overrides(RunConfig& c) {
  if (const char* s = std::getenv("AGENTIC_MASTER_SEED"); s && *s) {
    try {
      std::size_t used = 0;
      c.run.seed = std::stoull(s, &used);
      if (used != std::string_view(s).size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigInvalid, std::string("AGENTIC_MASTER_SEED is not an unsigned integer: ") + s);
    }
  }
  if (const char* s = std::getenv("AGENTIC_VERIFIER_ENDPOINT"); s && *s) c.committee.endpoint = s;
  if (const char* s = std::getenv("AGENTIC_PROBER_ENDPOINT"); s && *s) c.prober.endpoint = s;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigInvalid, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace agentic
