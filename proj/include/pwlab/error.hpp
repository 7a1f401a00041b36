// Error type shared by every pwlab module.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pwlab {

enum class Errc {
  InvalidSpec,
  PoincareViolation,
  SizeMismatch,
  ZeroField,
  NegativeInput,
  DeltaOutOfRange,
  PreconditionViolated,
  NonConvergence,
  SignFlip,
  BracketingFailure,
  CertificationFailure,
  BlowUpDetected,
  NonFinite,
  InsufficientSamples,
  NonPositiveEnergy,
  WindowOutOfRange,
  NoDissipation,
  NotKPlus,
  ConfigError,
  IoError,
};

inline std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::PoincareViolation: return "PoincareViolation";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::ZeroField: return "ZeroField";
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::DeltaOutOfRange: return "DeltaOutOfRange";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::SignFlip: return "SignFlip";
    case Errc::BracketingFailure: return "BracketingFailure";
    case Errc::CertificationFailure: return "CertificationFailure";
    case Errc::BlowUpDetected: return "BlowUpDetected";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::NonPositiveEnergy: return "NonPositiveEnergy";
    case Errc::WindowOutOfRange: return "WindowOutOfRange";
    case Errc::NoDissipation: return "NoDissipation";
    case Errc::NotKPlus: return "NotKPlus";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void ensure(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace pwlab
