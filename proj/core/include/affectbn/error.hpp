#ifndef AFFECTBN_ERROR_HPP
#define AFFECTBN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace affectbn {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AFFECTBN_DEFINE_ERROR(NAME)          \
  class NAME : public Error {                \
   public:                                   \
    using Error::Error;                      \
  };

// Graph / model construction. Cycle and dangling-reference failures are
// validation failures, so they subclass ValidationError.
AFFECTBN_DEFINE_ERROR(ValidationError)

class CycleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DanglingReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Density evaluation.
AFFECTBN_DEFINE_ERROR(MissingInputError)
AFFECTBN_DEFINE_ERROR(DomainError)
AFFECTBN_DEFINE_ERROR(SchemaMismatchError)

// Sampler.
AFFECTBN_DEFINE_ERROR(ConfigError)
AFFECTBN_DEFINE_ERROR(NonFiniteStartError)
AFFECTBN_DEFINE_ERROR(DiagnosticError)

// Predictive queries.
AFFECTBN_DEFINE_ERROR(FingerprintMismatchError)
AFFECTBN_DEFINE_ERROR(TargetObservedError)
AFFECTBN_DEFINE_ERROR(AllWeightsZeroError)

// File formats.
AFFECTBN_DEFINE_ERROR(ParseError)
AFFECTBN_DEFINE_ERROR(MissingColumnError)
AFFECTBN_DEFINE_ERROR(NonBinaryValueError)
AFFECTBN_DEFINE_ERROR(MissingValueError)

#undef AFFECTBN_DEFINE_ERROR

}  // namespace affectbn

#endif  // AFFECTBN_ERROR_HPP
