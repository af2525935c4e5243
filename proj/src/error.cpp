#include "vac/error.hpp"

namespace vac {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::ZeroLengthAudio: return "ZeroLengthAudio";
    case ErrorCode::UnsupportedChannelCount: return "UnsupportedChannelCount";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptyFeatureList: return "EmptyFeatureList";
    case ErrorCode::SilentClip: return "SilentClip";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AllMasked: return "AllMasked";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::UnknownFeatureKind: return "UnknownFeatureKind";
    case ErrorCode::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
  }
  return "Unknown";
}

}  // namespace vac
