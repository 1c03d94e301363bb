#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentic/errors.hpp"
#include "agentic/synthetic.hpp"

namespace agentic {

enum class CognitiveStage { Draft, Check, Refine, Finalize };

inline constexpr std::array<CognitiveStage, 4> kAllStages{CognitiveStage::Draft, CognitiveStage::Check,
                                                          CognitiveStage::Refine, CognitiveStage::Finalize};

inline std::string_view to_string(CognitiveStage stage) {
  switch (stage) {
    case CognitiveStage::Draft: return "draft";
    case CognitiveStage::Check: return "check";
    case CognitiveStage::Refine: return "refine";
    case CognitiveStage::Finalize: return "finalize";
  }
  return "draft";
}

inline CognitiveStage parse_stage(std::string_view text) {
  for (auto s : kAllStages)
    if (to_string(s) == text) return s;
  fail(ErrorCode::InvalidArgument, "unknown cognitive stage '" + std::string(text) + "'");
}

struct ProblemStatement {
  std::string text;
  std::vector<std::string> skill_names;
  /// Empty for problems produced by external generators.
  ConstraintSystem payload;

  bool operator==(const ProblemStatement&) const = default;
};

}  // namespace agentic
