#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oculorl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry.
class GimbalLock : public Error {
 public:
  using Error::Error;
};
class GazeParallel : public Error {
 public:
  using Error::Error;
};
class PenetratingPath : public Error {
 public:
  using Error::Error;
};

// Simulation and learning.
class Diverged : public Error {
 public:
  using Error::Error;
};
class EpisodeFinished : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class BufferTooSmall : public Error {
 public:
  using Error::Error;
};
class EmptyAfterDrop : public Error {
 public:
  using Error::Error;
};

// Persistence.
class IoFailure : public Error {
 public:
  using Error::Error;
};
class VersionMismatch : public Error {
 public:
  using Error::Error;
};
class CorruptChecksum : public Error {
 public:
  using Error::Error;
};
class CheckpointUnreadable : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration text. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed configuration with a bad or unknown key.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& key, const std::string& why)
      : Error(key + ": " + why), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace oculorl
