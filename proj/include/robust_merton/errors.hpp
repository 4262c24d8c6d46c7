#pragma once

#include <stdexcept>
#include <string>

namespace robust_merton {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input and model errors.
class ParseError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class DegenerateSupport : public Error { using Error::Error; };

// Numerical failures.
class LpFailure : public Error { using Error::Error; };
class NoConvergence : public Error { using Error::Error; };
class StepRejection : public Error { using Error::Error; };
class SaddleCertificateFailure : public Error { using Error::Error; };

// Verification verdicts.
class RangeViolation : public Error { using Error::Error; };
class MismatchError : public Error { using Error::Error; };
class BoundsViolation : public Error { using Error::Error; };
class Bankruptcy : public Error { using Error::Error; };
class EqualityViolation : public Error { using Error::Error; };
class SaddleViolation : public Error { using Error::Error; };

}  // namespace robust_merton
