#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentic {

enum class ErrorCode {
  // skill library
  MissingField,
  MalformedFrontmatter,
  DifficultyOutOfRange,
  DuplicateSkill,
  UnknownCategory,
  EmptySupport,
  ZeroModelProbabilityOnSupport,
  EmptyComposition,
  // environment
  EmptySkillSet,
  IllegalAction,
  EmptyDraft,
  ExpertFailure,
  // verification
  WrongCommitteeSize,
  ProberBackendUnavailable,
  // reward
  MissingTerminal,
  // mgpo
  GroupTooSmall,
  NonFiniteLogProb,
  NonPositiveRatio,
  EmptyBatch,
  InvalidExpertTrajectory,
  // curriculum
  EmptyCurriculum,
  // pipeline
  ConfigInvalid,
  LibraryEmpty,
  BackendUnavailable,
  InvalidArgument,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MalformedFrontmatter: return "MalformedFrontmatter";
    case ErrorCode::DifficultyOutOfRange: return "DifficultyOutOfRange";
    case ErrorCode::DuplicateSkill: return "DuplicateSkill";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::ZeroModelProbabilityOnSupport: return "ZeroModelProbabilityOnSupport";
    case ErrorCode::EmptyComposition: return "EmptyComposition";
    case ErrorCode::EmptySkillSet: return "EmptySkillSet";
    case ErrorCode::IllegalAction: return "IllegalAction";
    case ErrorCode::EmptyDraft: return "EmptyDraft";
    case ErrorCode::ExpertFailure: return "ExpertFailure";
    case ErrorCode::WrongCommitteeSize: return "WrongCommitteeSize";
    case ErrorCode::ProberBackendUnavailable: return "ProberBackendUnavailable";
    case ErrorCode::MissingTerminal: return "MissingTerminal";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::NonFiniteLogProb: return "NonFiniteLogProb";
    case ErrorCode::NonPositiveRatio: return "NonPositiveRatio";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InvalidExpertTrajectory: return "InvalidExpertTrajectory";
    case ErrorCode::EmptyCurriculum: return "EmptyCurriculum";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::LibraryEmpty: return "LibraryEmpty";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace agentic
