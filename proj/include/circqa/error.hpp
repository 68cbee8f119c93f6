#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace circqa {

enum class ErrorCode {
  TypeMismatch,
  IndexOutOfRange,
  UnfilledHole,
  ContainsFrames,
  SignatureMismatch,
  OverlappingSpans,
  UnknownToken,
  MalformedSentence,
  PersonNotInStory,
  InfeasibleConfig,
  NotEnoughStructures,
  UnknownScheme,
  WrongParamLength,
  MissingParameters,
  WireMapInvalid,
  LengthMismatch,
  NonFiniteLoss,
  OutOfRange,
  EmptyHalf,
  NoCorruptedExamples,
  ShapeMismatch,
  CastMismatch,
  BadSpec,
  Io,
  Format,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can dispatch on the kind rather than the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace circqa
