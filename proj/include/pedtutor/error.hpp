// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pedtutor {

/// Base class for every error raised by the library. The `kind()` string is
/// stable and is what the CLI prints next to the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define PEDTUTOR_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  }

PEDTUTOR_DEFINE_ERROR(PreconditionError);
PEDTUTOR_DEFINE_ERROR(IoError);
PEDTUTOR_DEFINE_ERROR(ParseError);

// core-model
PEDTUTOR_DEFINE_ERROR(UnknownTemplate);
PEDTUTOR_DEFINE_ERROR(EmptyProblem);
PEDTUTOR_DEFINE_ERROR(InvalidDialogue);

// llm-gateway
PEDTUTOR_DEFINE_ERROR(TransportError);
PEDTUTOR_DEFINE_ERROR(EmptyCompletion);
PEDTUTOR_DEFINE_ERROR(NoMatchingRule);

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& what)
      : Error("HttpError", what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// dataset
PEDTUTOR_DEFINE_ERROR(DuplicateId);
PEDTUTOR_DEFINE_ERROR(MissingBaseline);
PEDTUTOR_DEFINE_ERROR(InsufficientProblems);

// rollout
PEDTUTOR_DEFINE_ERROR(GroupAborted);

// reward
PEDTUTOR_DEFINE_ERROR(MalformedJudgeOutput);
PEDTUTOR_DEFINE_ERROR(EmptyGroup);

// eval
PEDTUTOR_DEFINE_ERROR(LengthMismatch);
PEDTUTOR_DEFINE_ERROR(EmptyReport);

// analysis
PEDTUTOR_DEFINE_ERROR(MalformedLabel);
PEDTUTOR_DEFINE_ERROR(DegenerateTable);

// cli
PEDTUTOR_DEFINE_ERROR(UnknownKey);
PEDTUTOR_DEFINE_ERROR(RangeError);
PEDTUTOR_DEFINE_ERROR(MissingEndpoint);
PEDTUTOR_DEFINE_ERROR(UsageError);

#undef PEDTUTOR_DEFINE_ERROR

}  // namespace pedtutor
