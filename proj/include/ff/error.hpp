#pragma once

#include <stdexcept>
#include <string>

namespace ff {

// Every recoverable failure in the toolkit carries one of these codes so
// callers (and the CLI) can react without string matching.
enum class Errc {
  // assembler / disassembler
  UnknownMnemonic,
  UndefinedLabel,
  DuplicateLabel,
  ImmediateOverflow,
  BadOperand,
  BadDirective,
  ImageTooLarge,
  DanglingBranch,
  BadImageFile,
  // emulator
  InputTooLong,
  OffsetUnreached,
  // faulter
  IndistinguishableInputs,
  BaselineCrash,
  // patcher
  OverlappingPatches,
  LabelCollision,
  SemanticsBroken,
  // ir
  UnsupportedShape,
  IndirectFlow,
  MissingUid,
  RegisterPressure,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::UnknownMnemonic: return "UnknownMnemonic";
    case Errc::UndefinedLabel: return "UndefinedLabel";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::ImmediateOverflow: return "ImmediateOverflow";
    case Errc::BadOperand: return "BadOperand";
    case Errc::BadDirective: return "BadDirective";
    case Errc::ImageTooLarge: return "ImageTooLarge";
    case Errc::DanglingBranch: return "DanglingBranch";
    case Errc::BadImageFile: return "BadImageFile";
    case Errc::InputTooLong: return "InputTooLong";
    case Errc::OffsetUnreached: return "OffsetUnreached";
    case Errc::IndistinguishableInputs: return "IndistinguishableInputs";
    case Errc::BaselineCrash: return "BaselineCrash";
    case Errc::OverlappingPatches: return "OverlappingPatches";
    case Errc::LabelCollision: return "LabelCollision";
    case Errc::SemanticsBroken: return "SemanticsBroken";
    case Errc::UnsupportedShape: return "UnsupportedShape";
    case Errc::IndirectFlow: return "IndirectFlow";
    case Errc::MissingUid: return "MissingUid";
    case Errc::RegisterPressure: return "RegisterPressure";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code), msg_(msg) {}

  Errc code() const { return code_; }
  const std::string& detail() const { return msg_; }

 private:
  Errc code_;
  std::string msg_;
};

}  // namespace ff
