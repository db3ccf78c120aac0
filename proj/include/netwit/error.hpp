#pragma once

#include <stdexcept>
#include <string>

namespace netwit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NETWIT_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

NETWIT_DEFINE_ERROR(AsymmetryError);
NETWIT_DEFINE_ERROR(NegativeDistance);
NETWIT_DEFINE_ERROR(InvalidMatrix);
NETWIT_DEFINE_ERROR(InvalidDistribution);
NETWIT_DEFINE_ERROR(SpaceMismatch);
NETWIT_DEFINE_ERROR(OverlappingBalls);
NETWIT_DEFINE_ERROR(EpsilonOutOfRange);
NETWIT_DEFINE_ERROR(TooLargeForExact);
NETWIT_DEFINE_ERROR(LevelOutOfRange);
NETWIT_DEFINE_ERROR(InsufficientSamples);
NETWIT_DEFINE_ERROR(SamplerExhausted);
NETWIT_DEFINE_ERROR(OddSupport);
NETWIT_DEFINE_ERROR(SizeMismatch);
NETWIT_DEFINE_ERROR(NoAnchorPoint);
NETWIT_DEFINE_ERROR(ZeroClusterMass);
NETWIT_DEFINE_ERROR(ResolutionIncompatible);
NETWIT_DEFINE_ERROR(FormatError);
NETWIT_DEFINE_ERROR(UncertifiedInstance);

#undef NETWIT_DEFINE_ERROR

/// Raised when d(a,c) > d(a,b) + d(b,c); carries the witnessing triple.
class TriangleViolation : public Error {
 public:
  TriangleViolation(std::size_t a, std::size_t b, std::size_t c, const std::string& what)
      : Error(what), a_(a), b_(b), c_(c) {}
  std::size_t a() const noexcept { return a_; }
  std::size_t b() const noexcept { return b_; }
  std::size_t c() const noexcept { return c_; }

 private:
  std::size_t a_, b_, c_;
};

}  // namespace netwit
