// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace viptt {

/// Failure categories surfaced by the library. Every thrown viptt::Error
/// carries exactly one of these.
enum class ErrorCode {
  // volume_io
  MalformedHeader,
  UnsupportedDatatype,
  DimensionMismatch,
  TruncatedData,
  IoFailure,
  MalformedTensorFile,
  // preprocess
  QueryOutOfRange,
  TooFewSamples,
  AlreadyNormalized,
  BadChannelCount,
  InvalidArgument,
  // dataset
  MalformedManifest,
  MissingFile,
  LabelOutOfRange,
  ClassTooSmall,
  EmptyClass,
  EmptyDataset,
  // nn / model
  ShapeMismatch,
  BackwardBeforeForward,
  ProbNotNormalized,
  BadConfig,
  MalformedCheckpoint,
  ConfigMismatch,
  // metrics
  LengthMismatch,
  DegenerateMarginals,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace viptt
