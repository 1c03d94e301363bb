#pragma once

// Test-only oracles and generators. Oracles are written independently of
// the library code they check: brute-force enumeration, naive formulas and
// finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "agentic/mgpo.hpp"
#include "agentic/policy.hpp"
#include "agentic/synthetic.hpp"

namespace testing_support {

using namespace agentic;

/// Least x in [0, lcm) satisfying every congruence, by enumeration.
inline std::optional<std::int64_t> brute_force_solution(const ConstraintSystem& system) {
  std::int64_t l = 1;
  for (const auto& c : system) l = std::lcm(l, c.modulus);
  for (std::int64_t x = 0; x < l; ++x) {
    bool ok = true;
    for (const auto& c : system) ok = ok && (x % c.modulus == c.residue);
    if (ok) return x;
  }
  return std::nullopt;
}

/// sech^2 straight from the definition.
inline double naive_sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

/// Two-pass standardization in long double with the same floor rule.
inline std::vector<double> oracle_standardize(const std::vector<double>& v, double floor) {
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<long double>(v.size());
  long double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<long double>(v.size());
  long double sd = std::sqrt(var);
  if (sd < floor) sd = floor;
  std::vector<double> out;
  for (double x : v) out.push_back(static_cast<double>((x - mean) / sd));
  return out;
}

/// A random MGPO batch: groups of random size in [min_group, max_group],
/// random stages, rewards, token counts and log-probabilities.
struct RandomBatch {
  Batch batch;
  PolicyEval eval;
};

inline RandomBatch random_batch(std::mt19937_64& rng, std::size_t groups, std::size_t min_group,
                                std::size_t max_group, std::size_t max_steps = 6, std::size_t max_tokens = 5) {
  std::uniform_int_distribution<std::size_t> gsize(min_group, max_group);
  std::uniform_int_distribution<std::size_t> nsteps(1, max_steps);
  std::uniform_int_distribution<std::size_t> ntok(1, max_tokens);
  std::uniform_int_distribution<int> stage(0, 3);
  std::uniform_real_distribution<double> reward(0.0, 2.0);
  std::uniform_real_distribution<double> lp(-4.0, -0.01);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  RandomBatch out;
  for (std::size_t g = 0; g < groups; ++g) {
    const auto n = gsize(rng);
    for (std::size_t e = 0; e < n; ++e) {
      EpisodeSpec ep;
      ep.group = g;
      ep.terminal_reward = reward(rng);
      std::vector<std::vector<double>> th, rf, od;
      const auto t_count = nsteps(rng);
      for (std::size_t t = 0; t < t_count; ++t) {
        StepSpec s;
        s.stage = static_cast<CognitiveStage>(stage(rng));
        s.process_reward = reward(rng) * 0.1;
        s.num_tokens = ntok(rng);
        ep.steps.push_back(s);
        std::vector<double> a, b, c;
        for (std::size_t j = 0; j < s.num_tokens; ++j) {
          const double base = lp(rng);
          a.push_back(base);
          b.push_back(std::min(-1e-3, base + jitter(rng)));
          c.push_back(std::min(-1e-3, base + jitter(rng)));
        }
        th.push_back(a);
        rf.push_back(b);
        od.push_back(c);
      }
      out.batch.push_back(ep);
      out.eval.theta.push_back(th);
      out.eval.ref.push_back(rf);
      out.eval.old.push_back(od);
    }
  }
  return out;
}

/// A toy softmax-policy batch: every step is one decision token followed by
/// deterministic tokens.
struct ToyProblem {
  SoftmaxPolicy policy;
  SoftmaxPolicy reference;
  SoftmaxPolicy old;
  Batch batch;
  Decisions decisions;
};

inline ToyProblem random_toy_problem(std::mt19937_64& rng, std::size_t num_features = 6) {
  std::normal_distribution<double> w(0.0, 0.7);
  std::uniform_int_distribution<std::size_t> gsize(2, 5), nsteps(1, 4), extra(0, 3);
  std::uniform_int_distribution<int> stage(0, 3);
  std::uniform_real_distribution<double> reward(0.0, 2.0), feat(-1.0, 1.0), coin(0.0, 1.0);
  ToyProblem tp{SoftmaxPolicy(num_features), SoftmaxPolicy(num_features), SoftmaxPolicy(num_features), {}, {}};
  for (auto* p : {&tp.policy, &tp.reference, &tp.old})
    for (auto& x : p->params()) x = w(rng);
  for (std::size_t g = 0; g < 2; ++g) {
    const auto n = gsize(rng);
    for (std::size_t e = 0; e < n; ++e) {
      EpisodeSpec ep;
      ep.group = g;
      ep.terminal_reward = reward(rng);
      std::vector<Decision> ds;
      const auto steps = nsteps(rng);
      for (std::size_t t = 0; t < steps; ++t) {
        Decision d;
        d.features.resize(num_features);
        d.features[0] = 1.0;
        for (std::size_t f = 1; f < num_features; ++f) d.features[f] = feat(rng);
        d.legal.fill(true);
        if (coin(rng) < 0.3) d.legal[2] = false;
        std::vector<double> p(kNumActionKinds);
        for (std::size_t a = 0; a < kNumActionKinds; ++a) p[a] = d.legal[a] ? 1.0 : 0.0;
        std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
        d.choice = pick(rng);
        ds.push_back(d);
        ep.steps.push_back({static_cast<CognitiveStage>(stage(rng)), reward(rng) * 0.1, 1 + extra(rng)});
      }
      tp.batch.push_back(ep);
      tp.decisions.push_back(ds);
    }
  }
  return tp;
}

inline PolicyEval toy_eval(const ToyProblem& tp, const SoftmaxPolicy& theta) {
  return {token_log_probs(theta, tp.decisions, tp.batch), token_log_probs(tp.reference, tp.decisions, tp.batch),
          token_log_probs(tp.old, tp.decisions, tp.batch)};
}

/// Central differences of f at params, step h.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> params, double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double x = params[k];
    params[k] = x + h;
    const double up = f(params);
    params[k] = x - h;
    const double down = f(params);
    params[k] = x;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a|| + ||b||, tiny)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("agentic-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

}  // namespace testing_support
