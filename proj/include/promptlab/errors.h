// Copyright 2026 The promptlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTLAB_ERRORS_H_
#define PROMPTLAB_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptlab {

// Root of every error raised by the library. The CLI maps subclasses onto
// exit codes: InputError and its children are input failures, everything
// else is a runtime failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied malformed or out-of-contract data.
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation precondition (argument range, ordering) does not hold.
class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

// The record or prompt lacks the fields a task needs.
class UnsupportedTaskError : public InputError {
 public:
  using InputError::InputError;
};

// Generated or stored text could not be parsed. Keeps the raw text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// A numerical routine left its tolerance envelope.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Survey state conflicts: duplicate vote, refresh after vote.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// A remote service call failed. Timeouts and transport failures are
// retryable; malformed replies and rejected requests are not.
class BackendError : public Error {
 public:
  enum class Kind { kTimeout, kTransport, kMalformedReply, kRejected };

  BackendError(Kind kind, const std::string& what, int attempts = 1)
      : Error(what), kind_(kind), attempts_(attempts) {}

  Kind kind() const { return kind_; }
  int attempts() const { return attempts_; }
  bool retryable() const {
    return kind_ == Kind::kTimeout || kind_ == Kind::kTransport;
  }

 private:
  Kind kind_;
  int attempts_;
};

std::string_view to_string(BackendError::Kind kind);

}  // namespace promptlab

#endif  // PROMPTLAB_ERRORS_H_
