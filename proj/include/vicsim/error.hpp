#pragma once

#include <stdexcept>
#include <string>

namespace vicsim {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid argument supplied by the caller (bad ratios, inverted ranges, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A pluggable backend is not registered or could not be reached.
class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class BackendFailure : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or metric during training.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace vicsim
