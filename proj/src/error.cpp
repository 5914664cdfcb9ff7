#include "ultdoa/error.hpp"

namespace ultdoa {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::DelayOutOfWindow: return "DelayOutOfWindow";
    case Errc::NoPeak: return "NoPeak";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::MissingReference: return "MissingReference";
    case Errc::SameAntenna: return "SameAntenna";
    case Errc::EmptyObservations: return "EmptyObservations";
    case Errc::Unsolvable: return "Unsolvable";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::ZeroMax: return "ZeroMax";
    case Errc::EmptyModel: return "EmptyModel";
    case Errc::EmptyErrors: return "EmptyErrors";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptPayload: return "CorruptPayload";
    case Errc::Disconnected: return "Disconnected";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ultdoa
