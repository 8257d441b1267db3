#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpinfer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class DimensionGuard : public Error {
 public:
  using Error::Error;
};

class EmptyMoments : public Error {
 public:
  using Error::Error;
};

class PieceLimitExceeded : public Error {
 public:
  using Error::Error;
};

class NoFeasiblePiece : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class TooFewRows : public Error {
 public:
  using Error::Error;
};

class GridTooLarge : public Error {
 public:
  using Error::Error;
};

class EmptyPanel : public Error {
 public:
  using Error::Error;
};

/// No grid point was accepted. Carries the smallest statistic seen so the
/// caller can tell "barely empty" from "badly misspecified".
class EmptySet : public Error {
 public:
  EmptySet(const std::string& what, double min_statistic)
      : Error(what), min_statistic_(min_statistic) {}
  double min_statistic() const noexcept { return min_statistic_; }

 private:
  double min_statistic_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid problem configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mpinfer
