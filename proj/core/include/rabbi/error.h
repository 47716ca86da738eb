#pragma once

#include <stdexcept>
#include <string>

namespace rabbi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, inconsistent or missing input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// A quantity that is undefined for the given arguments (empty sample,
// zero variance, zero qualified candidates, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// HTTP failures that survived the retry policy.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace rabbi
