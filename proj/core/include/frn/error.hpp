#pragma once

#include <stdexcept>
#include <string>

namespace frn {

// Root of the library's exception hierarchy. Every failure the library
// reports derives from this so callers can catch it in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/vector extents disagree, or a dimension is zero.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, or a normalizer denominator that evaluates to zero.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A function evaluated outside its domain (e.g. 0/0 in frn_scalar).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside its admissible interval (e.g. step > total).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (group size not dividing C, bad flags, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Object used before it was initialized (BN eval before any update).
class StateError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace frn
