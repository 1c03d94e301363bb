#pragma once

// Chat-completion adapters for verifier and prober backends. The transport
// is injected so tests can script responses; http_transport.hpp provides a
// network transport.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agentic/errors.hpp"
#include "agentic/skill_library.hpp"
#include "agentic/verification.hpp"

namespace agentic {

/// Sends a request body and returns the response body. Implementations
/// signal transport failures with ErrorCode::BackendUnavailable.
using Transport = std::function<std::string(const std::string& body)>;

inline constexpr int kBackendTokenBudget = 36000;

struct ChatSettings {
  std::string model;
  double temperature = 0.0;
  int max_tokens = kBackendTokenBudget;
};

inline nlohmann::json chat_request(const ChatSettings& s, const std::string& system, const std::string& user,
                                   std::uint64_t seed) {
  return {{"model", s.model},
          {"temperature", s.temperature},
          {"max_tokens", s.max_tokens},
          {"seed", seed},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}})}};
}

/// Message content of the first choice.
inline std::string chat_content(const std::string& response) {
  const auto j = nlohmann::json::parse(response, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::BackendUnavailable, "response is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::BackendUnavailable, "response lacks choices[0].message.content");
  }
}

/// First JSON object embedded in free text.
inline nlohmann::json embedded_json(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    fail(ErrorCode::BackendUnavailable, "no JSON object in model output");
  auto j = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::BackendUnavailable, "malformed JSON in model output");
  return j;
}

inline constexpr const char* kVerifierSystemPrompt =
    "You judge whether a proposed problem is well-posed and solvable. Reply with one JSON object: "
    "{\"validity\": 0 or 1, \"answer\": final answer string, \"flags\": [any of \"ambiguous\", "
    "\"underspecified\", \"incomplete-solution\"], \"rationale\": short string}.";

inline constexpr const char* kAuditSystemPrompt =
    "You audit a verification. Given the problem, its generation trace and three verdicts, decide whether "
    "the accepting verdicts are correct. Reply with one JSON object: {\"pass\": true or false}.";

inline constexpr const char* kProberSystemPrompt =
    "Solve the problem. End your reply with the final answer inside \\boxed{}.";

class ChatVerifier final : public VerifierBackend {
 public:
  ChatVerifier(std::string id, ChatSettings settings, Transport transport)
      : id_(std::move(id)), settings_(std::move(settings)), transport_(std::move(transport)) {}

  std::string id() const override { return id_; }

  VerifierVote vote(const VerificationRequest& request, std::uint64_t seed) override {
    const auto user = "Problem:\n" + request.problem.text + "\n\nGeneration trace:\n" + request.trace;
    const auto j = embedded_json(chat_content(transport_(chat_request(settings_, kVerifierSystemPrompt, user, seed).dump())));
    VerifierVote v;
    v.verifier_id = id_;
    v.validity = j.value("validity", 0) == 1 ? 1 : 0;
    if (j.contains("answer") && j["answer"].is_string()) v.answer = j["answer"].get<std::string>();
    else if (j.contains("answer") && j["answer"].is_number()) v.answer = j["answer"].dump();
    v.rationale = j.value("rationale", "");
    if (j.contains("flags") && j["flags"].is_array())
      for (const auto& f : j["flags"])
        if (f.is_string())
          if (auto flag = parse_vote_flag(f.get<std::string>())) v.flags.insert(*flag);
    return v;
  }

  bool audit(const VerificationRequest& request, const std::vector<VerifierVote>& votes,
             std::uint64_t seed) override {
    nlohmann::json vj = nlohmann::json::array();
    for (const auto& v : votes) vj.push_back({{"verifier", v.verifier_id}, {"validity", v.validity}, {"answer", v.answer}});
    const auto user =
        "Problem:\n" + request.problem.text + "\n\nGeneration trace:\n" + request.trace + "\n\nVerdicts:\n" + vj.dump();
    const auto j = embedded_json(chat_content(transport_(chat_request(settings_, kAuditSystemPrompt, user, seed).dump())));
    return j.value("pass", false);
  }

 private:
  std::string id_;
  ChatSettings settings_;
  Transport transport_;
};

/// Contents of the last \boxed{...}, or the trimmed reply when absent.
inline std::string extract_final_answer(const std::string& reply) {
  const auto pos = reply.rfind("\\boxed{");
  if (pos == std::string::npos) return std::string(detail::trim(reply));
  std::size_t depth = 1;
  const auto start = pos + 7;
  for (std::size_t i = start; i < reply.size(); ++i) {
    if (reply[i] == '{') ++depth;
    if (reply[i] == '}' && --depth == 0) return reply.substr(start, i - start);
  }
  return reply.substr(start);
}

class ChatProber final : public ProberBackend {
 public:
  ChatProber(std::string id, ChatSettings settings, Transport transport)
      : id_(std::move(id)), settings_(std::move(settings)), transport_(std::move(transport)) {}

  std::string id() const override { return id_; }

  std::string attempt(const ProbeRequest& request, std::uint64_t seed) override {
    auto s = settings_;
    s.temperature = request.temperature;
    return extract_final_answer(
        chat_content(transport_(chat_request(s, kProberSystemPrompt, request.problem_text, seed).dump())));
  }

 private:
  std::string id_;
  ChatSettings settings_;
  Transport transport_;
};

}  // namespace agentic
