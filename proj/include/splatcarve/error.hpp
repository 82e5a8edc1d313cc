#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splatcarve {

enum class ErrorCode {
  PointBehindCamera,
  DegenerateGeometry,
  InvalidCamera,
  MissingFile,
  DimensionMismatch,
  IoError,
  FormatError,
  EmptyUsage,
  EmptyVolume,
  NotSPD,
  VerticalAxis,
  EmptyMask,
  BothEmpty,
  BadDimensions,
  RankDeficient,
  SingularConcomitant,
  NoFeasibleMu,
  InsufficientCandidates,
  InvalidArgument,
  ConfigPathMissing,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

// Every module reports failures through this exception. The code is stable
// and machine-readable; the CLI prints it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace splatcarve
