#pragma once

// Per-category proficiency tracked by EMA; categories are drawn with
// probability proportional to 1 / (m_c + epsilon).

#include <map>
#include <string>
#include <vector>

#include "agentic/environment.hpp"
#include "agentic/errors.hpp"
#include "agentic/rng.hpp"

namespace agentic {

struct ProficiencyState {
  std::map<std::string, double> proficiency;
  double alpha = 0.2;
  double epsilon = 0.05;

  static ProficiencyState uniform(const std::vector<std::string>& categories, double initial = 0.5,
                                  double alpha = 0.2, double epsilon = 0.05) {
    ProficiencyState s;
    for (const auto& c : categories) s.proficiency[c] = initial;
    s.alpha = alpha;
    s.epsilon = epsilon;
    s.validate();
    return s;
  }

  void validate() const {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be > 0");
    for (const auto& [c, m] : proficiency)
      require(m >= 0.0 && m <= 1.0, ErrorCode::InvalidArgument, "proficiency of '" + c + "' outside [0,1]");
  }
};

inline ProficiencyState update_proficiency(ProficiencyState state, const std::map<std::string, double>& success_rates) {
  for (const auto& [category, rate] : success_rates) {
    const auto it = state.proficiency.find(category);
    require(it != state.proficiency.end(), ErrorCode::UnknownCategory, "unknown category '" + category + "'");
    require(rate >= 0.0 && rate <= 1.0, ErrorCode::InvalidArgument, "success rate outside [0,1]");
    it->second = (1.0 - state.alpha) * it->second + state.alpha * rate;
  }
  return state;
}

/// Normalized inverse-proficiency weights, in category order.
inline std::map<std::string, double> sampling_distribution(const ProficiencyState& state) {
  require(!state.proficiency.empty(), ErrorCode::EmptyCurriculum, "no categories to sample");
  std::map<std::string, double> p;
  double total = 0.0;
  for (const auto& [c, m] : state.proficiency) {
    p[c] = 1.0 / (m + state.epsilon);
    total += p[c];
  }
  for (auto& [c, w] : p) w /= total;
  return p;
}

inline std::string sample_category(const ProficiencyState& state, Rng& rng) {
  const auto p = sampling_distribution(state);
  std::vector<double> weights;
  std::vector<const std::string*> names;
  for (const auto& [c, w] : p) {
    names.push_back(&c);
    weights.push_back(w);
  }
  return *names[sample_weighted(rng, weights)];
}

inline std::string sample_category(const ProficiencyState& state, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sample_category(state, rng);
}

/// What counts as a success when computing per-category rates.
enum class SuccessMetric { Validity, ValidityAndDifficulty };

/// Per-category success ratio over the batch. Episodes whose verification hit
/// a backend error are excluded; categories without episodes are absent.
inline std::map<std::string, double> success_rates_from_batch(const std::vector<Trajectory>& trajectories,
                                                              SuccessMetric metric = SuccessMetric::Validity) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& t : trajectories) {
    if (t.terminal && t.terminal->verdict.reason == RejectionReason::BackendError) continue;
    auto& [ok, total] = counts[t.category];
    ++total;
    if (!t.terminal || t.terminal->verdict.valid != 1) continue;
    if (metric == SuccessMetric::ValidityAndDifficulty && !(t.terminal->probe.pass_rate < 1.0)) continue;
    ++ok;
  }
  std::map<std::string, double> rates;
  for (const auto& [c, n] : counts) rates[c] = static_cast<double>(n.first) / static_cast<double>(n.second);
  return rates;
}

}  // namespace agentic
