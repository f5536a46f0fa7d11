#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace retoksync {

// Root of every exception the library throws. Subclasses map onto the
// distinct failure classes the CLI reports with separate exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class PrecisionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Transport or protocol failure talking to a language-model backend.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::size_t attempts, bool retryable)
      : Error(what), attempts_(attempts), retryable_(retryable) {}

  std::size_t attempts() const noexcept { return attempts_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::size_t attempts_;
  bool retryable_;
};

// A received token is outside the truncated candidate set and Skip-X is off.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Sender and receiver views cannot be aligned (context mismatch, pool miss).
class SyncError : public Error {
 public:
  using Error::Error;
};

// Correction-message framing problems.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class CorruptionError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class RangeError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class OverflowError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace retoksync
