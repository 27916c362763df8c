#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mentra {

// Every failure the engine reports carries one of these codes. Codes are
// stable identifiers; they appear verbatim in JSON reports and CLI output.
enum class Errc {
  // trajectory grammar
  MissingThinkBlock,
  MissingAnswerBlock,
  MissingConclusion,
  MissingAnswerPrefix,
  TagOrderViolation,
  TextOutsideTags,
  MissingSections,
  EmptyAnswer,
  LengthOutOfRange,
  EmptyContent,
  InvalidContent,
  GeneratorCountUnavailable,
  UnparsableAnswer,
  // reward / judges
  JudgeUnavailable,
  // numerics
  InvalidStep,
  DomainError,
  TokenAlignmentMismatch,
  EmptyBatch,
  ShapeMismatch,
  UnknownSymbol,
  // trainer
  DatasetEmpty,
  CheckpointWriteFailure,
  CheckpointReadFailure,
  // rtg
  SolverUnavailable,
  ClientProtocolError,
  SessionNotAccepted,
  // eval
  KindMismatch,
  AlignmentError,
  DegenerateTable,
  EmptyInput,
  // gateway
  Timeout,
  ProtocolError,
  AuthError,
  RetriesExhausted,
  // config / io
  ConfigError,
  DatasetError,
  IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingThinkBlock: return "MissingThinkBlock";
    case Errc::MissingAnswerBlock: return "MissingAnswerBlock";
    case Errc::MissingConclusion: return "MissingConclusion";
    case Errc::MissingAnswerPrefix: return "MissingAnswerPrefix";
    case Errc::TagOrderViolation: return "TagOrderViolation";
    case Errc::TextOutsideTags: return "TextOutsideTags";
    case Errc::MissingSections: return "MissingSections";
    case Errc::EmptyAnswer: return "EmptyAnswer";
    case Errc::LengthOutOfRange: return "LengthOutOfRange";
    case Errc::EmptyContent: return "EmptyContent";
    case Errc::InvalidContent: return "InvalidContent";
    case Errc::GeneratorCountUnavailable: return "GeneratorCountUnavailable";
    case Errc::UnparsableAnswer: return "UnparsableAnswer";
    case Errc::JudgeUnavailable: return "JudgeUnavailable";
    case Errc::InvalidStep: return "InvalidStep";
    case Errc::DomainError: return "DomainError";
    case Errc::TokenAlignmentMismatch: return "TokenAlignmentMismatch";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnknownSymbol: return "UnknownSymbol";
    case Errc::DatasetEmpty: return "DatasetEmpty";
    case Errc::CheckpointWriteFailure: return "CheckpointWriteFailure";
    case Errc::CheckpointReadFailure: return "CheckpointReadFailure";
    case Errc::SolverUnavailable: return "SolverUnavailable";
    case Errc::ClientProtocolError: return "ClientProtocolError";
    case Errc::SessionNotAccepted: return "SessionNotAccepted";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::AlignmentError: return "AlignmentError";
    case Errc::DegenerateTable: return "DegenerateTable";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::Timeout: return "Timeout";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::AuthError: return "AuthError";
    case Errc::RetriesExhausted: return "RetriesExhausted";
    case Errc::ConfigError: return "ConfigError";
    case Errc::DatasetError: return "DatasetError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mentra
