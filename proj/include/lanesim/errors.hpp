#pragma once

#include <stdexcept>
#include <string>

namespace lanesim {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid topology, cost parameters or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

// A non-leader tried to allocate a shared buffer.
class OwnershipError : public Error {
 public:
  using Error::Error;
};

// A GPU already has a buffer published for the same role.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// Opening a view before the leader published its handle.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class AliasingError : public Error {
 public:
  using Error::Error;
};

// Matched send/recv disagree, or a program is inconsistent with its inputs.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class DeadlockError : public Error {
 public:
  using Error::Error;
};

class UnsupportedSizeError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

}  // namespace lanesim
