#pragma once

#include <stdexcept>
#include <string>

namespace rbcml {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite parameters, nonpositive densities, log of zero probabilities.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Pairwise quantities requested with i == j.
class InvalidPairError : public Error {
 public:
  using Error::Error;
};

class InvalidPositionError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// Violated structural invariant of a value type (negative weight, empty graph, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Exact enumeration requested for an m beyond its cap.
class TooLargeError : public Error {
 public:
  using Error::Error;
};

// Optimizer iterate left the configured bound; the maximizer is likely unbounded.
class DivergedError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (profiles, graphs, weights, specs, configs).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace rbcml
