#pragma once

#include <stdexcept>
#include <string>

namespace cptensor {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension, order or length mismatch between inputs.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but outside the operation's domain
/// (non-homogeneous form, degree overflow, unsupported cone, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A recovered atom lies too far outside the simplex to be clipped.
class AtomRejected : public Error {
 public:
  using Error::Error;
};

/// Atom extraction from a flat moment sequence failed.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw StructuralError(what);
}

}  // namespace detail
}  // namespace cptensor
