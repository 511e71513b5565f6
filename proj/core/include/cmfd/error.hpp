#pragma once

#include <stdexcept>
#include <string>

namespace cmfd {

// Base of every exception thrown by the library. Callers that only care about
// "something failed" catch this; the subclasses name the failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ResourceError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class InputTooSmallError : public Error { using Error::Error; };
class EmptyInputError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class SpecError : public Error { using Error::Error; };

// geometry
class DegeneracyError : public Error { using Error::Error; };
class InsufficientDataError : public Error { using Error::Error; };
class NoModelError : public Error { using Error::Error; };
class PointAtInfinityError : public Error { using Error::Error; };

}  // namespace cmfd
