#pragma once

#include <stdexcept>
#include <string>

namespace rxbench {

enum class ErrorKind {
  InvalidArgument,
  ZeroMarginal,
  PatternOutOfRange,
  InfeasiblePattern,
  DimensionMismatch,
  EmptyData,
  NumericalUnderflow,
  Divergence,
  ConfigInvalid,
  EpisodeTooShort,
  ParseError,
  UnitError,
  TooFewEpisodes,
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rxbench
