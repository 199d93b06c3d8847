#pragma once

#include <stdexcept>
#include <string>

namespace quad {

// Every domain failure in the library throws quad::Error carrying one of
// these codes. Argument-contract violations (bad epsilon, inconsistent
// m/h/T) throw std::invalid_argument instead and are not part of this
// taxonomy.
enum class Errc {
  SingularMass,
  NotPositiveDefinite,
  MissingSprings,
  NegativeSpring,
  DimensionMismatch,
  SingularL,
  StepOverflow,
  ZeroFinalState,
  NoVelocityBlock,
  NonUnitMasses,
  SingularV,
  LegendreViolated,
  KappaTooSmall,
  MissingParameter,
  SingularR,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::SingularMass: return "SingularMass";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::MissingSprings: return "MissingSprings";
    case Errc::NegativeSpring: return "NegativeSpring";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingularL: return "SingularL";
    case Errc::StepOverflow: return "StepOverflow";
    case Errc::ZeroFinalState: return "ZeroFinalState";
    case Errc::NoVelocityBlock: return "NoVelocityBlock";
    case Errc::NonUnitMasses: return "NonUnitMasses";
    case Errc::SingularV: return "SingularV";
    case Errc::LegendreViolated: return "LegendreViolated";
    case Errc::KappaTooSmall: return "KappaTooSmall";
    case Errc::MissingParameter: return "MissingParameter";
    case Errc::SingularR: return "SingularR";
  }
  return "UnknownError";
}

}  // namespace quad
