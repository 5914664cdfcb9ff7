#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ultdoa {

enum class Errc {
  InvalidArgument,
  DegenerateGeometry,
  DelayOutOfWindow,
  NoPeak,
  InsufficientData,
  MissingReference,
  SameAntenna,
  EmptyObservations,
  Unsolvable,
  NonFiniteLoss,
  EmptyTrainingSet,
  ZeroMax,
  EmptyModel,
  EmptyErrors,
  VersionMismatch,
  CorruptPayload,
  Disconnected,
  ConfigError,
  ShapeMismatch,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-readable error code. All library failures
/// are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ultdoa
