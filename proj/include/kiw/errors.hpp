#pragma once

#include <stdexcept>
#include <string>

namespace kiw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KIW_DEFINE_ERROR(Name)              \
  class Name : public Error {               \
   public:                                  \
    explicit Name(const std::string& what)  \
        : Error(#Name ": " + what) {}       \
  };

KIW_DEFINE_ERROR(NoCoveringChart)
KIW_DEFINE_ERROR(OutsideOverlap)
KIW_DEFINE_ERROR(ShapeMismatch)
KIW_DEFINE_ERROR(ValenceMismatch)
KIW_DEFINE_ERROR(InsufficientSmoothness)
KIW_DEFINE_ERROR(GridMismatch)
KIW_DEFINE_ERROR(SchemeSmoothnessMismatch)
KIW_DEFINE_ERROR(WiringMismatch)
KIW_DEFINE_ERROR(FlowStopped)
KIW_DEFINE_ERROR(HypothesisViolation)
KIW_DEFINE_ERROR(ConfigError)

#undef KIW_DEFINE_ERROR

}  // namespace kiw
