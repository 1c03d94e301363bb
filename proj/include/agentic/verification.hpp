#pragma once

// Verifier committee acceptance rule and Pass@k difficulty probing with a
// weak-to-strong curriculum of probers.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agentic/errors.hpp"
#include "agentic/problem.hpp"
#include "agentic/rng.hpp"
#include "agentic/synthetic.hpp"

namespace agentic {

enum class VoteFlag { Ambiguous, Underspecified, IncompleteSolution };

inline std::string_view to_string(VoteFlag flag) {
  switch (flag) {
    case VoteFlag::Ambiguous: return "ambiguous";
    case VoteFlag::Underspecified: return "underspecified";
    case VoteFlag::IncompleteSolution: return "incomplete-solution";
  }
  return "ambiguous";
}

inline std::optional<VoteFlag> parse_vote_flag(std::string_view text) {
  for (auto f : {VoteFlag::Ambiguous, VoteFlag::Underspecified, VoteFlag::IncompleteSolution})
    if (to_string(f) == text) return f;
  return std::nullopt;
}

struct VerifierVote {
  std::string verifier_id;
  int validity = 0;
  std::string answer;
  std::string rationale;
  std::set<VoteFlag> flags;
};

enum class RejectionReason {
  None,
  MajorityFailed,
  Flagged,
  MissingAnswer,
  InconsistentAnswers,
  BackendError,
  NoSubmission,
};

inline std::string_view to_string(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::None: return "accepted";
    case RejectionReason::MajorityFailed: return "majority-failed";
    case RejectionReason::Flagged: return "flagged";
    case RejectionReason::MissingAnswer: return "missing-answer";
    case RejectionReason::InconsistentAnswers: return "inconsistent-answers";
    case RejectionReason::BackendError: return "backend-error";
    case RejectionReason::NoSubmission: return "no-submission";
  }
  return "accepted";
}

struct VerifierVerdict {
  int valid = 0;
  std::vector<VerifierVote> votes;
  std::string audit_verifier;
  bool audit_passed = false;
  RejectionReason reason = RejectionReason::MajorityFailed;
};

inline constexpr std::size_t kCommitteeSize = 3;

/// Canonical answer text: whitespace collapsed and case folded; numeric
/// answers are reduced to a normal decimal form ("07", "7.0" -> "7").
inline std::string canonical_answer(std::string_view raw) {
  std::string folded;
  bool space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      space = !folded.empty();
      continue;
    }
    if (space) folded.push_back(' ');
    space = false;
    folded.push_back(static_cast<char>(std::tolower(c)));
  }
  double v = 0.0;
  const auto res = std::from_chars(folded.data(), folded.data() + folded.size(), v);
  if (!folded.empty() && res.ec == std::errc{} && res.ptr == folded.data() + folded.size() && std::isfinite(v)) {
    if (v == std::floor(v) && std::fabs(v) < 9.0e15) return std::to_string(static_cast<long long>(v));
    char buf[64];
    const auto out = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, out.ptr);
  }
  return folded;
}

/// Committee acceptance: (i) at least two validity votes; (ii) no accepting
/// vote flags ambiguity/underspecification and each supplies a complete
/// answer; (iii) accepting answers agree, or the audit verifier confirms.
/// The audit never overrides a failed majority.
inline VerifierVerdict aggregate_votes(std::vector<VerifierVote> votes, const std::string& audit_verifier,
                                       bool audit_passed) {
  require(votes.size() == kCommitteeSize, ErrorCode::WrongCommitteeSize,
          "committee needs exactly 3 votes, got " + std::to_string(votes.size()));
  require(std::any_of(votes.begin(), votes.end(), [&](const auto& v) { return v.verifier_id == audit_verifier; }),
          ErrorCode::InvalidArgument, "audit verifier '" + audit_verifier + "' is not on the committee");
  for (const auto& v : votes)
    require(v.validity == 0 || v.validity == 1, ErrorCode::InvalidArgument, "validity must be 0 or 1");

  VerifierVerdict verdict;
  verdict.audit_verifier = audit_verifier;
  verdict.audit_passed = audit_passed;
  verdict.valid = 0;

  std::vector<const VerifierVote*> accepting;
  for (const auto& v : votes)
    if (v.validity == 1) accepting.push_back(&v);

  if (accepting.size() < 2) {
    verdict.reason = RejectionReason::MajorityFailed;
  } else if (std::any_of(accepting.begin(), accepting.end(), [](const VerifierVote* v) {
               return v->flags.contains(VoteFlag::Ambiguous) || v->flags.contains(VoteFlag::Underspecified);
             })) {
    verdict.reason = RejectionReason::Flagged;
  } else if (std::any_of(accepting.begin(), accepting.end(), [](const VerifierVote* v) {
               return canonical_answer(v->answer).empty() || v->flags.contains(VoteFlag::IncompleteSolution);
             })) {
    verdict.reason = RejectionReason::MissingAnswer;
  } else {
    const auto first = canonical_answer(accepting.front()->answer);
    const bool consistent = std::all_of(accepting.begin(), accepting.end(),
                                        [&](const VerifierVote* v) { return canonical_answer(v->answer) == first; });
    if (consistent || audit_passed) {
      verdict.valid = 1;
      verdict.reason = RejectionReason::None;
    } else {
      verdict.reason = RejectionReason::InconsistentAnswers;
    }
  }
  verdict.votes = std::move(votes);
  return verdict;
}

// ---------------------------------------------------------------------------
// Backends

/// Verifiers see the full generation trace plus the final statement.
struct VerificationRequest {
  std::string trace;
  ProblemStatement problem;
};

class VerifierBackend {
 public:
  virtual ~VerifierBackend() = default;
  virtual std::string id() const = 0;
  virtual VerifierVote vote(const VerificationRequest& request, std::uint64_t seed) = 0;
  /// Second audit: true when this verifier confirms an answer among the votes.
  virtual bool audit(const VerificationRequest& request, const std::vector<VerifierVote>& votes,
                     std::uint64_t seed) = 0;
};

/// Probers see only the final statement.
struct ProbeRequest {
  std::string problem_text;
  double temperature = 1.4;
};

class ProberBackend {
 public:
  virtual ~ProberBackend() = default;
  virtual std::string id() const = 0;
  /// One independent solution attempt; returns the final answer text.
  virtual std::string attempt(const ProbeRequest& request, std::uint64_t seed) = 0;
};

// ---------------------------------------------------------------------------
// Synthetic committee members

enum class PersonaKind { Sound, Noisy, Abstaining };

struct Persona {
  PersonaKind kind = PersonaKind::Sound;
  double p_flip = 0.0;
};

inline std::string_view to_string(PersonaKind kind) {
  switch (kind) {
    case PersonaKind::Sound: return "sound";
    case PersonaKind::Noisy: return "noisy";
    case PersonaKind::Abstaining: return "abstaining";
  }
  return "sound";
}

/// Sound personas report ground-truth solvability and the least solution;
/// noisy ones flip validity with probability p_flip; abstainers decline.
inline VerifierVote synthetic_verifier_vote(const ProblemStatement& problem, const Persona& persona,
                                            std::uint64_t seed = 0, std::string verifier_id = {}) {
  require(!problem.payload.empty(), ErrorCode::InvalidArgument, "synthetic verifier needs a constraint payload");
  VerifierVote vote;
  vote.verifier_id = verifier_id.empty() ? std::string(to_string(persona.kind)) : std::move(verifier_id);
  if (persona.kind == PersonaKind::Abstaining) {
    vote.validity = 0;
    vote.flags.insert(VoteFlag::Underspecified);
    vote.rationale = "declined: statement judged underspecified";
    return vote;
  }
  const auto solution = least_solution(problem.payload);
  vote.validity = solution ? 1 : 0;
  vote.answer = solution ? std::to_string(*solution) : "";
  vote.rationale = solution ? "consistent system; least solution found by CRT merge"
                            : "contradictory congruences";
  if (persona.kind == PersonaKind::Noisy && persona.p_flip > 0.0) {
    auto rng = make_rng(seed);
    if (uniform01(rng) < persona.p_flip) {
      vote.validity = 1 - vote.validity;
      if (vote.validity == 1 && !solution) {
        vote.answer = std::to_string(uniform_index(rng, static_cast<std::uint64_t>(period(problem.payload))));
      } else if (vote.validity == 0) {
        vote.answer.clear();
      }
      vote.rationale = "noisy judgement";
    }
  }
  return vote;
}

class SyntheticVerifier final : public VerifierBackend {
 public:
  SyntheticVerifier(std::string id, Persona persona) : id_(std::move(id)), persona_(persona) {}

  std::string id() const override { return id_; }
  const Persona& persona() const { return persona_; }

  VerifierVote vote(const VerificationRequest& request, std::uint64_t seed) override {
    return synthetic_verifier_vote(request.problem, persona_, seed, id_);
  }

  bool audit(const VerificationRequest& request, const std::vector<VerifierVote>& votes,
             std::uint64_t seed) override {
    if (persona_.kind == PersonaKind::Abstaining) return false;
    const auto solution = least_solution(request.problem.payload);
    bool confirms = solution && std::any_of(votes.begin(), votes.end(), [&](const VerifierVote& v) {
                      return v.validity == 1 && canonical_answer(v.answer) == std::to_string(*solution);
                    });
    if (persona_.kind == PersonaKind::Noisy && persona_.p_flip > 0.0) {
      auto rng = make_rng(seed);
      if (uniform01(rng) < persona_.p_flip) confirms = !confirms;
    }
    return confirms;
  }

 private:
  std::string id_;
  Persona persona_;
};

using Committee = std::vector<std::shared_ptr<VerifierBackend>>;

/// Collects three votes, picks the audit verifier uniformly (seeded) and
/// applies the acceptance rule. Backend failures yield an invalid verdict
/// with reason backend-error.
inline VerifierVerdict run_committee(const Committee& committee, const VerificationRequest& request,
                                     std::uint64_t seed) {
  require(committee.size() == kCommitteeSize, ErrorCode::WrongCommitteeSize,
          "committee needs exactly 3 verifiers");
  std::vector<VerifierVote> votes;
  try {
    for (std::size_t i = 0; i < committee.size(); ++i)
      votes.push_back(committee[i]->vote(request, derive_seed(seed, 1, i)));
    auto rng = make_rng(derive_seed(seed, 2));
    const auto audit_index = uniform_index(rng, committee.size());
    const bool passed = committee[audit_index]->audit(request, votes, derive_seed(seed, 3));
    return aggregate_votes(std::move(votes), committee[audit_index]->id(), passed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BackendUnavailable) throw;
    VerifierVerdict verdict;
    verdict.valid = 0;
    verdict.votes = std::move(votes);
    verdict.reason = RejectionReason::BackendError;
    return verdict;
  }
}

// ---------------------------------------------------------------------------
// Probing

struct ProbeResult {
  double pass_rate = 0.0;
  int attempts = 0;
  int successes = 0;
  std::string prober_id;
};

inline constexpr double kReferenceProberTemperature = 1.4;

/// Budget-limited random search: each attempt examines `breadth` distinct
/// candidates drawn uniformly from one period of the system it reads off the
/// statement, answering with a satisfying candidate if one was drawn.
/// Temperature scales breadth relative to the reference temperature 1.4.
class SyntheticProber final : public ProberBackend {
 public:
  SyntheticProber(std::string id, std::int64_t breadth) : id_(std::move(id)), breadth_(breadth) {
    require(breadth >= 1, ErrorCode::InvalidArgument, "prober breadth must be >= 1");
  }

  std::string id() const override { return id_; }
  std::int64_t breadth() const { return breadth_; }

  std::int64_t effective_breadth(double temperature) const {
    const auto scaled = std::floor(static_cast<double>(breadth_) * temperature / kReferenceProberTemperature);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(scaled));
  }

  std::string attempt(const ProbeRequest& request, std::uint64_t seed) override {
    const auto system = parse_system_text(request.problem_text);
    if (!system) return "";
    const auto m = period(*system);
    const auto picks = std::min(effective_breadth(request.temperature), m);
    auto rng = make_rng(seed);
    // Floyd's algorithm: `picks` distinct values from [0, m).
    std::set<std::int64_t> chosen;
    for (auto j = m - picks; j < m; ++j) {
      const auto t = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(j + 1)));
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    for (auto x : chosen)
      if (satisfies(*system, x)) return std::to_string(x);
    return std::to_string(*chosen.begin());
  }

 private:
  std::string id_;
  std::int64_t breadth_;
};

struct ProberPool {
  std::vector<std::shared_ptr<ProberBackend>> probers;  // weak -> strong
  std::size_t active_index = 0;
  double mastery = 0.5;
  /// False right after a switch: the next batch accuracy seeds the EMA.
  bool mastery_initialized = true;
  double alpha = 0.2;
  double switch_threshold = 0.30;
  std::size_t batch_size = 500;
  double temperature = kReferenceProberTemperature;

  ProberBackend& active() const {
    require(active_index < probers.size() && probers[active_index] != nullptr,
            ErrorCode::ProberBackendUnavailable, "no active prober");
    return *probers[active_index];
  }
};

/// Reference answer for grading: the least solution of the payload.
inline std::optional<std::string> reference_answer(const ProblemStatement& problem) {
  if (problem.payload.empty()) return std::nullopt;
  const auto s = least_solution(problem.payload);
  if (!s) return std::nullopt;
  return std::to_string(*s);
}

/// Pass@k on the active prober, graded against `reference` by canonical
/// match. A missing reference (unsolvable problem) grades every attempt wrong.
inline ProbeResult probe(const ProblemStatement& problem, const ProberPool& pool, int k, std::uint64_t seed,
                         const std::optional<std::string>& reference) {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be >= 1");
  auto& prober = pool.active();
  const ProbeRequest request{problem.text, pool.temperature};
  const auto expected = reference ? std::optional(canonical_answer(*reference)) : std::nullopt;
  ProbeResult result;
  result.prober_id = prober.id();
  result.attempts = k;
  for (int i = 0; i < k; ++i) {
    std::string answer;
    try {
      answer = prober.attempt(request, derive_seed(seed, static_cast<std::uint64_t>(i)));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BackendUnavailable)
        fail(ErrorCode::ProberBackendUnavailable, "prober '" + prober.id() + "': " + e.what());
      throw;
    }
    if (expected && canonical_answer(answer) == *expected) ++result.successes;
  }
  result.pass_rate = static_cast<double>(result.successes) / static_cast<double>(k);
  return result;
}

inline ProbeResult probe(const ProblemStatement& problem, const ProberPool& pool, int k, std::uint64_t seed) {
  return probe(problem, pool, k, seed, reference_answer(problem));
}

struct MasteryUpdate {
  ProberPool pool;
  bool switched = false;
  /// Mastery fell below threshold on the strongest prober.
  bool exhausted = false;
};

/// EMA mastery update at a batch boundary, switching to the next prober
/// when mastery drops below the threshold.
inline MasteryUpdate update_mastery(ProberPool pool, double batch_accuracy) {
  require(batch_accuracy >= 0.0 && batch_accuracy <= 1.0, ErrorCode::InvalidArgument,
          "batch accuracy must lie in [0,1]");
  MasteryUpdate out;
  if (!pool.mastery_initialized) {
    pool.mastery = batch_accuracy;
    pool.mastery_initialized = true;
  } else {
    pool.mastery = (1.0 - pool.alpha) * pool.mastery + pool.alpha * batch_accuracy;
  }
  if (pool.mastery < pool.switch_threshold) {
    if (pool.active_index + 1 < pool.probers.size()) {
      ++pool.active_index;
      pool.mastery_initialized = false;
      out.switched = true;
    } else {
      out.exhausted = true;
    }
  }
  out.pool = std::move(pool);
  return out;
}

/// Accumulates per-problem accuracies and applies update_mastery each time a
/// full batch of pool.batch_size problems has been probed.
class ProberCurriculum {
 public:
  explicit ProberCurriculum(ProberPool pool) : pool_(std::move(pool)) {}

  const ProberPool& pool() const { return pool_; }
  std::size_t pending() const { return pending_.size(); }
  std::size_t switches() const { return switches_; }
  std::size_t batches() const { return batches_; }

  /// Returns the update applied when this observation completes a batch.
  std::optional<MasteryUpdate> observe(double accuracy) {
    pending_.push_back(accuracy);
    if (pending_.size() < pool_.batch_size) return std::nullopt;
    double sum = 0.0;
    for (double a : pending_) sum += a;
    pending_.clear();
    auto update = update_mastery(pool_, sum / static_cast<double>(pool_.batch_size));
    pool_ = update.pool;
    ++batches_;
    if (update.switched) ++switches_;
    return update;
  }

  void restore(std::size_t active_index, double mastery, bool initialized, std::vector<double> pending,
               std::size_t switches, std::size_t batches) {
    pool_.active_index = active_index;
    pool_.mastery = mastery;
    pool_.mastery_initialized = initialized;
    pending_ = std::move(pending);
    switches_ = switches;
    batches_ = batches;
  }
  const std::vector<double>& pending_values() const { return pending_; }

 private:
  ProberPool pool_;
  std::vector<double> pending_;
  std::size_t switches_ = 0;
  std::size_t batches_ = 0;
};

}  // namespace agentic
