#pragma once

#include <stdexcept>
#include <string>

namespace noma {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes do not conform.
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

/// Least-squares system is (numerically) rank deficient.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// S = K leaves no inactive users, so the false-alarm rate is undefined.
class SaturatedSupportError : public Error {
 public:
  using Error::Error;
};

/// Training loss became non-finite.
class DivergedTrainingError : public Error {
 public:
  using Error::Error;
};

/// Model file is structurally valid but describes a different shape/version.
class VersionMismatchError : public Error {
 public:
  using Error::Error;
};

/// Model file is truncated or fails its checksum.
class CorruptFileError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value (CLI / experiment spec level).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace noma
