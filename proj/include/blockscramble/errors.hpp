#pragma once

#include <stdexcept>
#include <string>

namespace blockscramble {

// Every library failure derives from Error so callers can catch one type.
// The CLI maps the concrete classes onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class RangeError     : public Error { public: using Error::Error; };
class KeyMisuseError : public Error { public: using Error::Error; };
class SchemeError    : public Error { public: using Error::Error; };
class ParseError     : public Error { public: using Error::Error; };
class FormatError    : public Error { public: using Error::Error; };
class IoError        : public Error { public: using Error::Error; };
class DomainError    : public Error { public: using Error::Error; };
class StateError     : public Error { public: using Error::Error; };

// Raised when training produces a non-finite value; what() names the tensor.
class NumericError : public Error { public: using Error::Error; };

} // namespace blockscramble
