#include "splatcarve/error.hpp"

namespace splatcarve {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InvalidCamera: return "InvalidCamera";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::EmptyUsage: return "EmptyUsage";
    case ErrorCode::EmptyVolume: return "EmptyVolume";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::VerticalAxis: return "VerticalAxis";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::BothEmpty: return "BothEmpty";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::SingularConcomitant: return "SingularConcomitant";
    case ErrorCode::NoFeasibleMu: return "NoFeasibleMu";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigPathMissing: return "ConfigPathMissing";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace splatcarve
