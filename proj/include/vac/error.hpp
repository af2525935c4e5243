#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vac {

enum class ErrorCode {
  // audio
  MalformedContainer,
  UnsupportedEncoding,
  ZeroLengthAudio,
  UnsupportedChannelCount,
  TooShort,
  // features / augment
  EmptyFeatureList,
  SilentClip,
  // synth
  InvalidSpec,
  IoFailure,
  // nn / models
  ShapeMismatch,
  AllMasked,
  NonFiniteGradient,
  UnknownFeatureKind,
  EmptyLabelSet,
  // train
  EmptyManifest,
  NonFiniteLoss,
  EmptySplit,
  InvalidArgument,
  CheckpointMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vac
