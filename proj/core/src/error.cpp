// SPDX-License-Identifier: Apache-2.0
#include "viptt/error.hpp"

namespace viptt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MALFORMED_HEADER";
    case ErrorCode::UnsupportedDatatype: return "UNSUPPORTED_DATATYPE";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::TruncatedData: return "TRUNCATED_DATA";
    case ErrorCode::IoFailure: return "IO_FAILURE";
    case ErrorCode::MalformedTensorFile: return "MALFORMED_TENSOR_FILE";
    case ErrorCode::QueryOutOfRange: return "QUERY_OUT_OF_RANGE";
    case ErrorCode::TooFewSamples: return "TOO_FEW_SAMPLES";
    case ErrorCode::AlreadyNormalized: return "ALREADY_NORMALIZED";
    case ErrorCode::BadChannelCount: return "BAD_CHANNEL_COUNT";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::MalformedManifest: return "MALFORMED_MANIFEST";
    case ErrorCode::MissingFile: return "MISSING_FILE";
    case ErrorCode::LabelOutOfRange: return "LABEL_OUT_OF_RANGE";
    case ErrorCode::ClassTooSmall: return "CLASS_TOO_SMALL";
    case ErrorCode::EmptyClass: return "EMPTY_CLASS";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::BackwardBeforeForward: return "BACKWARD_BEFORE_FORWARD";
    case ErrorCode::ProbNotNormalized: return "PROB_NOT_NORMALIZED";
    case ErrorCode::BadConfig: return "BAD_CONFIG";
    case ErrorCode::MalformedCheckpoint: return "MALFORMED_CHECKPOINT";
    case ErrorCode::ConfigMismatch: return "CONFIG_MISMATCH";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::DegenerateMarginals: return "DEGENERATE_MARGINALS";
  }
  return "UNKNOWN";
}

}  // namespace viptt
