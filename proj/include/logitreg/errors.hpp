#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace logitreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise out-of-domain numeric input.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A precondition on shapes, sizes or enum combinations was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The per-sample loss is monotone and has no finite minimizer (alpha == 0).
class NoFiniteMinimum : public Error {
 public:
  using Error::Error;
};

class DivergedAtEpoch : public Error {
 public:
  DivergedAtEpoch(std::int64_t epoch, const std::string& what)
      : Error("diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  std::int64_t epoch() const noexcept { return epoch_; }

 private:
  std::int64_t epoch_;
};

/// Mean signed logit is not positive; the direction points to the wrong side.
class SignError : public Error {
 public:
  using Error::Error;
};

class IndeterminateAccuracy : public Error {
 public:
  using Error::Error;
};

/// X^T X is singular (typically d >= N).
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Class means coincide, so there is no signal subspace to split off.
class DegenerateSignalSubspace : public Error {
 public:
  using Error::Error;
};

// Embedding-file errors. Each failure mode of the reader has its own type.
class FileError : public Error {
 public:
  using Error::Error;
};
class BadMagic : public FileError {
 public:
  using FileError::FileError;
};
class VersionMismatch : public FileError {
 public:
  using FileError::FileError;
};
class TruncatedFile : public FileError {
 public:
  using FileError::FileError;
};
class LabelOutOfRange : public FileError {
 public:
  using FileError::FileError;
};

/// Invalid run configuration; the message names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace logitreg
