#pragma once

// Line-delimited JSON persistence for trajectories and per-iteration metrics.
//
// Trajectory record fields:
//   episode_id, iteration, group, category, skills[], truncated,
//   steps[] {stage, action, text, num_tokens, process_reward, active_skills[]},
//   problem (string or null),
//   verdict {valid, reason, audit_verifier, audit_passed,
//            votes[] {verifier, validity, answer, flags[]}},
//   probe {pass_rate, attempts, successes, prober},
//   terminal {problem_text, valid, pass_rate, terminal_reward} (null when truncated),
//   terminal_reward, process_reward_total

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentic/environment.hpp"
#include "agentic/errors.hpp"

namespace agentic {

struct EpisodeMeta {
  std::size_t iteration = 0;
  std::size_t group = 0;
  std::vector<std::string> skills;
};

inline nlohmann::json vote_to_json(const VerifierVote& v) {
  std::vector<std::string> flags;
  for (auto f : v.flags) flags.emplace_back(to_string(f));
  return {{"verifier", v.verifier_id}, {"validity", v.validity}, {"answer", v.answer}, {"flags", flags}};
}

inline nlohmann::json trajectory_to_json(const Trajectory& traj, const EpisodeMeta& meta) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : traj.steps) {
    steps.push_back({{"stage", std::string(to_string(s.observation.stage))},
                     {"action", std::string(to_string(s.action.kind))},
                     {"text", s.action.serialized()},
                     {"num_tokens", s.action.tokens.size()},
                     {"process_reward", s.process_reward},
                     {"active_skills", s.observation.active_skills}});
  }
  nlohmann::json j = {{"episode_id", traj.episode_id},
                      {"iteration", meta.iteration},
                      {"group", meta.group},
                      {"category", traj.category},
                      {"skills", meta.skills},
                      {"truncated", traj.truncated()},
                      {"steps", steps},
                      {"process_reward_total", traj.process_total()}};
  j["problem"] = traj.submission ? nlohmann::json(traj.submission->text) : nlohmann::json(nullptr);
  if (traj.terminal) {
    const auto& t = *traj.terminal;
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& v : t.verdict.votes) votes.push_back(vote_to_json(v));
    j["verdict"] = {{"valid", t.verdict.valid},
                    {"reason", std::string(to_string(t.verdict.reason))},
                    {"audit_verifier", t.verdict.audit_verifier},
                    {"audit_passed", t.verdict.audit_passed},
                    {"votes", votes}};
    j["probe"] = {{"pass_rate", t.probe.pass_rate},
                  {"attempts", t.probe.attempts},
                  {"successes", t.probe.successes},
                  {"prober", t.probe.prober_id}};
    j["terminal"] = {{"problem_text", t.problem.text},
                     {"valid", t.verdict.valid},
                     {"pass_rate", t.probe.pass_rate},
                     {"terminal_reward", t.terminal_reward}};
    j["terminal_reward"] = t.terminal_reward;
  } else {
    j["terminal"] = nullptr;
    j["verdict"] = {{"valid", 0}, {"reason", std::string(to_string(RejectionReason::NoSubmission))}};
    j["probe"] = nullptr;
    j["terminal_reward"] = 0.0;
  }
  return j;
}

/// Appends whole lines with one write(2) on an O_APPEND descriptor, so a
/// crash leaves at most a torn final line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(ErrorCode::Io, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;
  ~JsonlWriter() {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const nlohmann::json& record) {
    const auto line = record.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const auto n = ::write(fd_, line.data() + off, line.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::Io, "write to " + path_.string() + " failed: " + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

/// Parsed records of a JSONL file; a torn trailing line is ignored.
inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::vector<nlohmann::json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) break;
    out.push_back(std::move(j));
  }
  return out;
}

/// Rewrites `path` keeping only records with iteration < `limit`, via a
/// temporary file and rename.
inline void truncate_jsonl_to_iteration(const std::filesystem::path& path, std::size_t limit) {
  if (!std::filesystem::exists(path)) return;
  const auto records = read_jsonl(path);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& r : records)
      if (r.value("iteration", std::size_t{0}) < limit) out << r.dump() << "\n";
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << text;
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace agentic
